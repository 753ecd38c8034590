from __future__ import annotations

import pytest
from PIL import Image, ImageDraw

HUES = [(220, 40, 40), (40, 200, 60), (50, 80, 230), (230, 210, 40), (160, 60, 200)]


def toy_image(cls: int, i: int) -> Image.Image:
    """Deterministic colored-shape image: hue encodes the class."""
    img = Image.new("RGB", (96, 96), HUES[cls % len(HUES)])
    draw = ImageDraw.Draw(img)
    x = 16 + (i * 7) % 32
    y = 16 + (i * 11) % 32
    if cls % 3 == 0:
        draw.ellipse([x, y, x + 40, y + 40], fill=(255, 255, 255))
    elif cls % 3 == 1:
        draw.rectangle([x, y, x + 40, y + 40], fill=(15, 15, 15))
    else:
        draw.polygon([(x, y + 40), (x + 20, y), (x + 40, y + 40)], fill=(90, 90, 90))
    return img


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """5 classes x 10 images plus the base/novel class-list files."""
    root = tmp_path_factory.mktemp("toyimgs")
    names = ["apple", "fern", "ocean", "sand", "plum"]
    for cls, name in enumerate(names):
        folder = root / name
        folder.mkdir()
        for i in range(10):
            toy_image(cls, i).save(folder / f"img_{i:02d}.png")
    base_list = root / "base.txt"
    base_list.write_text("ocean\napple\nfern\n", encoding="utf-8")
    novel_list = root / "novel.txt"
    novel_list.write_text("sand\nplum\n", encoding="utf-8")
    return root, base_list, novel_list
