"""Print path losses and the cascade-to-direct power ratio for the configured geometry.

Useful for judging how much a surface can possibly contribute: the script
reports, for a user at several distances from the surface, the ratio of the
best-case (phase-aligned) cascade amplitude to the direct-link amplitude.
"""
import numpy as np

from _common import parser, resolve
from starppo.channel import pathloss_los_db, pathloss_nlos_db
from starppo.geometry import USER_HEIGHT, Position3D


def main():
    cfg = resolve(parser(__doc__).parse_args())
    env = cfg.env
    bs, ris = Position3D(*env.bs), Position3D(*env.ris0)
    f_c = env.channel.f_c
    l_br = pathloss_los_db(bs.distance(ris), f_c)
    print(f"noise power {10 * np.log10(env.noise.sigma2) + 30:.1f} dBm")
    print(f"BS-RIS   {bs.distance(ris):8.1f} m  {l_br:7.2f} dB (LoS)")
    for d in (5, 20, 100, 300):
        user = Position3D(ris.x + d, ris.y, USER_HEIGHT)
        l_ru = pathloss_nlos_db(user.distance(ris), f_c, ris.z)
        l_bu = pathloss_nlos_db(user.distance(bs), f_c, bs.z)
        direct = 10 ** (-l_bu / 20)
        cascade = env.n * 10 ** (-(l_br + l_ru) / 20)
        ratio = ((direct + cascade) / direct) ** 2
        print(f"user {d:4d} m from RIS: direct {l_bu:6.1f} dB, RIS-user {l_ru:6.1f} dB, "
              f"best-case power gain x{ratio:.4f}")


if __name__ == "__main__":
    main()
