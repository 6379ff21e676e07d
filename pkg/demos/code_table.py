"""Print n, k, distance bound, mask percent and depth saving for every preset."""

from bilayer.bbcode import estimate_distance
from bilayer.layout import classify_generators, embed, make_layout
from bilayer.presets import PRESETS, preset_code
from bilayer.router import savings


def main() -> None:
    print(f"{'code':<16}{'d<=':>5}{'mask':>9}{'steps':>8}{'saving':>9}")
    for name, pre in PRESETS.items():
        code = preset_code(name)
        cls = classify_generators(embed(code, make_layout(code, *pre.embedding)))
        d = estimate_distance(code, 200, seed=0).upper_bound
        print(f"{pre.label:<16}{d:>5}{100 * cls.mask_percent:>8.2f}%"
              f"{pre.steps_short:>4},{pre.steps_long:<3}{savings(pre.steps_short, pre.steps_long, 5):>8.2f}%")


if __name__ == "__main__":
    main()
