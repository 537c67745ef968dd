"""Regenerates data/toy/{train,test} from images bundled with scikit-image."""

import pathlib

import numpy as np
from skimage import data

SIZE = 96

# (image loader, top, left, split)
CROPS = [
    ("astronaut", 40, 180, "train"),
    ("coffee", 120, 300, "train"),
    ("chelsea", 60, 120, "train"),
    ("rocket", 200, 250, "train"),
    ("hubble_deep_field", 150, 200, "train"),
    ("immunohistochemistry", 100, 100, "train"),
    ("retina", 600, 500, "train"),
    ("astronaut", 300, 320, "train"),
    ("coffee", 250, 60, "test"),
    ("chelsea", 180, 300, "test"),
    ("rocket", 80, 120, "test"),
    ("retina", 300, 700, "test"),
]


def write_ppm(path, rgb):
    h, w, _ = rgb.shape
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())


def main():
    root = pathlib.Path(__file__).resolve().parent.parent / "data" / "toy"
    counts = {"train": 0, "test": 0}
    for name, top, left, split in CROPS:
        img = getattr(data, name)()
        crop = img[top:top + SIZE, left:left + SIZE, :3]
        assert crop.shape == (SIZE, SIZE, 3), (name, crop.shape)
        out = root / split
        out.mkdir(parents=True, exist_ok=True)
        write_ppm(out / f"{counts[split]:02d}_{name}.ppm", crop)
        counts[split] += 1
    print(counts)


if __name__ == "__main__":
    main()
