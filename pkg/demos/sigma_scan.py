"""Fate of the P2 orbit across σ at (m, p, N) = (3, 2, 3), then bisection for σ*."""

from __future__ import annotations

from blowup_lab.shooting import find_sigma_star, sigma0_sigma1_report, sigma_scan


def main() -> None:
    grid = [0.2, 0.5, 1, 2, 5, 10, 20]
    scan = sigma_scan(3, 2, 3, grid, workers=4)
    for s, kind in zip(scan.parameter_grid, scan.kinds()):
        print(f"sigma = {s:5g}  {kind}")
    rep = sigma0_sigma1_report(3, 2, 3, scan)
    print(f"transitions: {rep['transitions']}  (sigma0 >= {rep['sigma0_lower']}, sigma1 <= {rep['sigma1_upper']})")
    lo, hi, _ = scan.boundaries[0]
    star = find_sigma_star(3, 2, 3, (lo, hi), tol=5e-3)
    print(f"sigma* in [{star.bracket[0]:.6f}, {star.bracket[1]:.6f}] after {star.steps} bisections")
    w = star.witness
    print(f"closest orbit: sigma = {w['sigma']:.6f}, distance to P1 = {w['min_dist_P1']:.2e}")


if __name__ == "__main__":
    main()
