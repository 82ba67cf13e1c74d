"""Coarse sweep of the two-auxiliary objective with an optional contour plot (needs matplotlib)."""

import sys

from mdlab.experiments import figd_sweep


def main(step: float = 0.05) -> None:
    result = figd_sweep(0.035, step, refine=True)
    print(f"max {result.max_value:.4f} at {result.argmax}, bound {result.bound:.4f}, margin {result.margin:.4f}")
    if "--plot" not in sys.argv:
        return
    import matplotlib.pyplot as plt

    plt.imshow(result.surface.T, origin="lower", extent=(0, 1, 0, 1))
    plt.xlabel("alpha0")
    plt.ylabel("beta0")
    plt.colorbar(label="max over (alpha1, beta1)")
    plt.savefig("figd_surface.png", dpi=120)
    print("wrote figd_surface.png")


if __name__ == "__main__":
    main()
