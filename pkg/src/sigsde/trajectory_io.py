"""Trajectory CSV files: header ``t,y0,...,ym`` with an optional leading ``sample`` column."""
import csv
import glob
import os

import numpy as np


def _header(width, with_sample):
    cols = ["t"] + [f"y{k}" for k in range(width)]
    return (["sample"] if with_sample else []) + cols


def write_trajectories(target, grid, paths, per_file=False):
    """Write paths (N, L+1, m+1) sampled on ``grid``.

    With ``per_file`` the target is a directory receiving sample_00000.csv, ...;
    otherwise one file with a leading ``sample`` column.  Returns the files written.
    """
    paths = np.asarray(paths, dtype=float)
    if paths.ndim == 2:
        paths = paths[None]
    N, P, width = paths.shape
    if len(grid) != P:
        raise ValueError("grid and paths disagree on the number of samples")
    if per_file:
        os.makedirs(target, exist_ok=True)
        files = []
        for s in range(N):
            fn = os.path.join(target, f"sample_{s:05d}.csv")
            with open(fn, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(_header(width, False))
                for t, row in zip(grid, paths[s]):
                    w.writerow([repr(float(t)), *(repr(float(x)) for x in row)])
            files.append(fn)
        return files
    parent = os.path.dirname(target)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(target, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_header(width, True))
        for s in range(N):
            for t, row in zip(grid, paths[s]):
                w.writerow([s, repr(float(t)), *(repr(float(x)) for x in row)])
    return [target]


def _read_one(fn):
    with open(fn, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{fn}: empty file")
    head = [h.strip() for h in rows[0]]
    with_sample = head[0] == "sample"
    cols = head[1:] if with_sample else head
    if not cols or cols[0] != "t" or cols[1:] != [f"y{k}" for k in range(len(cols) - 1)]:
        raise ValueError(f"{fn}: header must be [sample,]t,y0,...,ym")
    data = np.array(rows[1:], dtype=float)
    if data.size == 0:
        raise ValueError(f"{fn}: no samples")
    if not with_sample:
        return data[:, 0], data[None, :, 1:]
    ids = data[:, 0].astype(int)
    uniq = list(dict.fromkeys(ids))
    grids, paths = [], []
    for s in uniq:
        block = data[ids == s]
        grids.append(block[:, 1])
        paths.append(block[:, 2:])
    if any(len(g) != len(grids[0]) or not np.array_equal(g, grids[0]) for g in grids):
        raise ValueError(f"{fn}: samples do not share a time grid")
    return grids[0], np.array(paths)


def read_trajectories(source):
    """Read a trajectory file or a directory of per-sample files -> (grid, paths)."""
    if os.path.isdir(source):
        files = sorted(glob.glob(os.path.join(source, "*.csv")))
        if not files:
            raise ValueError(f"{source}: no CSV files")
        parts = [_read_one(fn) for fn in files]
        grid = parts[0][0]
        if any(not np.array_equal(g, grid) for g, _ in parts):
            raise ValueError(f"{source}: samples do not share a time grid")
        return grid, np.concatenate([p for _, p in parts])
    return _read_one(source)
