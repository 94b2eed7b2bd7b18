"""Job execution bodies, shared by the inline executor and worker processes."""
from __future__ import annotations

import time

from ..bitio import RangeDecoder
from ..kernels import KernelSet
from ..reconstruct import (
    FilterContext,
    PictureBuffers,
    Profile,
    ReconContext,
    compute_mc_prediction,
    execute_filter_row,
    reconstruct_ctu,
)
from ..syntax import CtxBank, MotionField, ParsedCtu, PicParams, parse_ctu


def parse_picture_payload(payload: bytes, params: PicParams) -> tuple[list[ParsedCtu], float]:
    """Entropy-decode every CTU of one picture (strictly serial)."""
    t0 = time.perf_counter()
    dec = RangeDecoder(payload)
    bank = CtxBank()
    mf = MotionField(params.width, params.height)
    rows = (params.height + params.ctu_size - 1) // params.ctu_size
    cols = (params.width + params.ctu_size - 1) // params.ctu_size
    ctus = []
    for r in range(rows):
        for c in range(cols):
            ctus.append(parse_ctu(dec, bank, r, c, params, mf))
    return ctus, time.perf_counter() - t0


def run_recon(ctu: ParsedCtu, params: PicParams, bufs: PictureBuffers,
              ref_bufs: PictureBuffers | None, kset: KernelSet,
              lmcs_lut, staged: bool, profiling: bool) -> dict | None:
    profile = Profile() if profiling else None
    ctx = ReconContext(
        pic=params, kernels=kset, bufs=bufs, ref_bufs=ref_bufs,
        lmcs_lut=lmcs_lut, use_staged_pred=staged, profile=profile,
    )
    t0 = time.perf_counter()
    reconstruct_ctu(ctu, ctx)
    if profile is None:
        return None
    profile.add("other", max(0.0, (time.perf_counter() - t0) - sum(profile.t.values())))
    return profile.t


def run_mcpre(cu, params: PicParams, bufs: PictureBuffers,
              ref_bufs: PictureBuffers, kset: KernelSet,
              profiling: bool) -> dict | None:
    t0 = time.perf_counter()
    ctx = ReconContext(pic=params, kernels=kset, bufs=bufs, ref_bufs=ref_bufs)
    compute_mc_prediction(cu, ctx)
    if not profiling:
        return None
    return {"inter": time.perf_counter() - t0}


def run_filter(row: int, params: PicParams, bufs: PictureBuffers,
               fctx: FilterContext, kset: KernelSet,
               profiling: bool) -> tuple[int, dict | None]:
    profile = Profile() if profiling else None
    t0 = time.perf_counter()
    finalized = execute_filter_row(row, bufs, fctx, kset, profile)
    if profile is None:
        return finalized, None
    profile.add("other", max(0.0, (time.perf_counter() - t0) - sum(profile.t.values())))
    return finalized, profile.t
