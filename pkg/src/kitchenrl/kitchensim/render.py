"""Procedural rendering: 16x16 object patches and the 32x32 egocentric view."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .categories import NUM_CATEGORIES, Category
from .world import GRID, Pitch, WorldState, Yaw, cone_cells, visible_objects

PATCH = 16
EGO = 32
_BLOCK = 8
_EMPTY_CELL = 0.05
_GLYPH_SALT = 10007

_glyphs: dict[int, np.ndarray] = {}
_patch_cache: dict[tuple, np.ndarray] = {}


def base_glyph(category: Category) -> np.ndarray:
    g = _glyphs.get(int(category))
    if g is None:
        rng = np.random.default_rng(_GLYPH_SALT + int(category))
        g = (rng.random((PATCH, PATCH)) < 0.5).astype(np.float64)
        g.flags.writeable = False
        _glyphs[int(category)] = g
    return g


def _downsample5(glyph: np.ndarray) -> np.ndarray:
    idx = (np.arange(5) * PATCH) // 5
    return glyph[np.ix_(idx, idx)]


def render_patch(obj, viewer_yaw: Yaw, child_category: Optional[Category] = None
                 ) -> np.ndarray:
    key = (int(obj.category), int(viewer_yaw), obj.is_on, obj.is_open,
           obj.is_filled, obj.is_sliced, obj.is_cooked,
           None if child_category is None else int(child_category))
    cached = _patch_cache.get(key)
    if cached is not None:
        return cached
    img = np.rot90(base_glyph(obj.category), k=int(viewer_yaw)).copy()
    if obj.is_on:
        img[0:2, :] = 1.0
    if obj.is_open:
        img[5:11, 5:11] = 0.1
    if obj.is_filled:
        img[10:16, :] = 0.9
    if obj.is_sliced:
        img[6:10, 0::2] = 0.0
    if obj.is_cooked:
        img *= 0.5
    if child_category is not None:
        img[5:10, 5:10] = _downsample5(base_glyph(child_category))
    img.flags.writeable = False
    if len(_patch_cache) > 20000:
        _patch_cache.clear()
    _patch_cache[key] = img
    return img


def _first_child_category(world: WorldState, oid: int) -> Optional[Category]:
    best = None
    for o in world.objects.values():
        if o.parent == oid and (best is None or o.id < best.id):
            best = o
    return None if best is None else best.category


def render_ego(world: WorldState) -> np.ndarray:
    img = np.zeros((EGO, EGO), dtype=np.float64)
    _, _, _, pitch = world.agent
    want_height = 1 if pitch == Pitch.LEVEL else 0
    by_cell: dict[tuple[int, int], tuple[int, int]] = {}
    for obj in world.objects.values():
        if obj.height != want_height or world.inside_closed(obj.id):
            continue
        depth = 0
        cur = obj
        while cur.parent is not None and cur.parent != -1:
            depth += 1
            cur = world.objects[cur.parent]
        prev = by_cell.get(obj.cell)
        if prev is None or (depth, obj.id) > prev[:2]:
            by_cell[obj.cell] = (depth, obj.id, int(obj.category))
    for c, r, depth, lat in cone_cells(world.agent):
        block_r = (2 - depth) * _BLOCK
        block_c = (lat + 1) * _BLOCK
        hit = by_cell.get((c, r))
        val = _EMPTY_CELL if hit is None else (hit[2] + 1) / (NUM_CATEGORIES + 1)
        img[block_r:block_r + _BLOCK, block_c:block_c + _BLOCK] = val
    return img


def loc_vector(world: WorldState) -> np.ndarray:
    col, row, yaw, pitch = world.agent
    half = (GRID - 1) / 2.0
    return np.array([
        col / half - 1.0,
        row / half - 1.0,
        0.0,
        int(yaw) * (2.0 / 3.0) - 1.0,
        int(pitch) * 2.0 - 1.0,
        0.0,
    ], dtype=np.float64)


@dataclass(frozen=True)
class ObservationBundle:
    ego: np.ndarray
    patches: tuple[np.ndarray, ...]
    patch_ids: tuple[int, ...]
    loc: np.ndarray


def observe(world: WorldState) -> ObservationBundle:
    _, _, yaw, _ = world.agent
    ids = visible_objects(world)
    patches = tuple(
        render_patch(world.objects[oid], yaw, _first_child_category(world, oid))
        for oid in ids)
    ego = render_ego(world)
    ego.flags.writeable = False
    loc = loc_vector(world)
    loc.flags.writeable = False
    return ObservationBundle(ego=ego, patches=patches, patch_ids=tuple(ids), loc=loc)
