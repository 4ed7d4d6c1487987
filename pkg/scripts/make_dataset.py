"""Write the desk-scale corpus (ratings + title sidecar) to a directory.

Any knob of the generator can be overridden, e.g.:

    python scripts/make_dataset.py --out data/ --users 2000 --noise-sd 0.6
"""

import argparse
from dataclasses import replace
from pathlib import Path

from coffee_rec.synthetic import SyntheticConfig, generate_ratings, write_dat, write_titles


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--users", type=int)
    parser.add_argument("--items", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--mean-ratings", type=float)
    parser.add_argument("--noise-sd", type=float)
    args = parser.parse_args()

    cfg = SyntheticConfig()
    overrides = {}
    if args.users is not None:
        overrides["n_users"] = args.users
    if args.items is not None:
        overrides["n_items"] = args.items
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.mean_ratings is not None:
        overrides["mean_ratings"] = args.mean_ratings
    if args.noise_sd is not None:
        overrides["noise_sd"] = args.noise_sd
    cfg = replace(cfg, **overrides)

    args.out.mkdir(parents=True, exist_ok=True)
    ratings = generate_ratings(cfg)
    write_dat(ratings, args.out / "ratings.dat")
    write_titles(cfg.n_items, args.out / "movies.dat")
    print(f"{len(ratings)} ratings for {cfg.n_users} users over {cfg.n_items} items "
          f"-> {args.out}/ratings.dat (+ movies.dat)")


if __name__ == "__main__":
    main()
