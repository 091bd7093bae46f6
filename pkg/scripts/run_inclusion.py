"""Circular-inclusion benchmark: RMSE ordering and thermodynamic violations vs noise."""
import argparse
import os
import sys

from ddcm_vms.cli import main as ddcm


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="results/inclusion")
    p.add_argument("--n", type=int, default=40)
    p.add_argument("--noise", default="0,0.25,0.5,1")
    p.add_argument("--seed", default="42")
    p.add_argument("--kappa", default="1")
    args = p.parse_args(argv)
    code = ddcm(["inclusion", "--n", str(args.n), "--noise", args.noise, "--seed", args.seed,
                 "--kappa", args.kappa, "--out", args.out])
    if code == 0:
        with open(os.path.join(args.out, "inclusion_d0_rmse.csv")) as fh:
            print(fh.read())
    return code


if __name__ == "__main__":
    sys.exit(main())
