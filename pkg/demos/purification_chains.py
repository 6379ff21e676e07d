"""Bell-chain fidelity, success rate and effective CNOT error against chain length."""

from bilayer.noise import NoiseModel
from bilayer.purify import build_purify_table


def main(p: float = 1e-3, shots: int = 50_000) -> None:
    table = build_purify_table(16, NoiseModel(p=p), shots=shots, seed=1, lengths=[2, 4, 8, 16])
    print(f"p = {p:g}")
    print(f"{'L':>3}{'success':>10}{'fidelity':>10}{'cnot err / p':>14}")
    for L in table.lengths:
        e = table[L]
        print(f"{L:>3}{e.success_prob:>10.4f}{e.fidelity:>10.5f}{e.cnot_error / p:>14.2f}")


if __name__ == "__main__":
    main()
