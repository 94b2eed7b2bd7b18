"""Test-stream encoder: rate-unaware mode decisions over the decoder kernels.

The encoder's reconstruction runs the exact decoder code path
(reconstruct_ctu + execute_filter_row), so its returned reconstruction is
bit-identical to what any conforming decode of the emitted stream yields.
Mode decisions minimize SSD + lambda * bits with a rough bit estimate;
lambda = 0.57 * 2^((qp - 12) / 3).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bitio, syntax
from .bitio import (
    PictureHeader,
    RangeEncoder,
    SequenceHeader,
    TOOL_ALF,
    TOOL_BDPCM,
    TOOL_CCALF,
    TOOL_DBLK,
    TOOL_IBC,
    TOOL_LMCS,
    TOOL_SAO,
    write_picture_header,
    write_sequence_header,
)
from .kernels import KernelSet
from .kernels.filters import (
    SAO_EDGE_NEIGHBORS,
    alf_block_vector,
    ccalf_block_vector,
    lmcs_build_inverse,
)
from .kernels.transforms import KIND_DCT2, mts_kinds
from .pipeline.decoder import params_from_headers
from .reconstruct import (
    FilterContext,
    PictureBuffers,
    ReconContext,
    _avail_fn,
    build_boundary_meta,
    deblock_band,
    execute_filter_row,
    gather_intra_refs,
    reconstruct_ctu,
)
from .syntax import (
    CtxBank,
    DIR_HOR,
    DIR_VER,
    MODE_BDPCM,
    MODE_IBC,
    MODE_INTER,
    MODE_INTRA,
    MotionField,
    ParsedCtu,
    ParsedCu,
    PicParams,
    Rect,
    ReconProgress,
    SaoParams,
    validate_bv,
)

MV_SEARCH_RANGE = 8           # integer full-search radius around the predictor
MAX_MV_Y = MV_SEARCH_RANGE + 1

# fixed ALF candidate sets (6 off-center pair coefficients; center derived),
# always including identity so signaling never hurts
ALF_CANDIDATES = (
    (0, 0, 0, 0, 0, 0),
    (1, 2, 3, 4, 6, 8),
    (2, 4, 5, 8, 10, 12),
    (-1, -2, -2, -3, -4, -4),
)

# fixed CCALF candidate sets (8 taps, |c| <= 16), identity first
CCALF_CANDIDATES = (
    (0, 0, 0, 0, 0, 0, 0, 0),
    (2, 1, 1, -1, 2, -1, 1, -1),
    (-2, -1, -1, 1, -2, 1, -1, 1),
    (4, 2, 2, -2, 4, -2, 2, -2),
)

# canned-contrast LMCS codeword counts at 8-bit scale (sum 256, each >= 1):
# compresses darks/brights, stretches midtones
LMCS_CONTRAST_8 = (8, 8, 12, 14, 18, 22, 24, 22, 22, 24, 22, 18, 14, 12, 8, 8)


@dataclass
class EncoderConfig:
    qp: int = 32
    gop: str = "ai"                 # "ai" (all-intra) or "ipp"
    tool_flags: int = TOOL_DBLK | TOOL_SAO
    ctu_size: int = 64
    lmcs_table: str = "identity"    # "identity" or "contrast"
    frames: int | None = None
    simd: bool = True
    effort: str = "normal"          # "fast" skips quadtree/MTS search (bench streams)

    def validate(self) -> None:
        if not (0 <= self.qp <= 63):
            raise ValueError(f"qp out of range: {self.qp}")
        if self.gop not in ("ai", "ipp"):
            raise ValueError(f"gop must be 'ai' or 'ipp', got {self.gop!r}")
        if self.ctu_size not in (32, 64):
            raise ValueError(f"ctu_size must be 32 or 64, got {self.ctu_size}")
        if self.lmcs_table not in ("identity", "contrast"):
            raise ValueError(f"unknown lmcs_table {self.lmcs_table!r}")
        if self.effort not in ("normal", "fast"):
            raise ValueError(f"unknown effort {self.effort!r}")


def rd_lambda(qp: int) -> float:
    return 0.57 * 2.0 ** ((qp - 12) / 3.0)


def lmcs_counts_for(table: str, bit_depth: int) -> list[int]:
    if table == "identity":
        return [(1 << bit_depth) // 16] * 16
    scale = (1 << bit_depth) // 256
    return [c * scale for c in LMCS_CONTRAST_8]


def _ssd(a: np.ndarray, b: np.ndarray) -> int:
    d = a.astype(np.int64) - b.astype(np.int64)
    return int((d * d).sum())


def _sad(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.abs(a.astype(np.int32) - b.astype(np.int32)).sum())


def _coeff_bits(block: np.ndarray | None) -> int:
    if block is None:
        return 1
    mags = np.abs(block.astype(np.int32))
    nz = mags[mags > 0]
    if nz.size == 0:
        return 1
    return 8 + int(nz.size) * 2 + 2 * int(np.log2(nz).sum() + nz.size)


def _vec_bits(v: tuple[int, int]) -> int:
    return sum(2 * int(abs(c)).bit_length() + 2 for c in v)


class _PictureEncoder:
    """Single-picture mode decisions plus the authoritative reconstruction."""

    def __init__(self, enc: "Encoder", header: PictureHeader,
                 source: list[np.ndarray], ref: PictureBuffers | None) -> None:
        self.enc = enc
        self.seq = enc.seq
        self.cfg = enc.config
        self.header = header
        self.params = params_from_headers(self.seq, header)
        self.source = source
        self.ref = ref
        self.kset = enc.kset
        self.lam = rd_lambda(header.qp)
        self.bufs = PictureBuffers(self.seq, wide=False)
        self.mf = MotionField(self.seq.width, self.seq.height)
        self.lut = None
        if header.lmcs_counts is not None:
            self.lut = lmcs_build_inverse(header.lmcs_counts, self.seq.bit_depth)
        self.ctx = ReconContext(
            pic=self.params, kernels=self.kset, bufs=self.bufs,
            ref_bufs=ref, lmcs_lut=self.lut,
        )
        self.rows = (self.seq.height + self.cfg.ctu_size - 1) // self.cfg.ctu_size
        self.cols = (self.seq.width + self.cfg.ctu_size - 1) // self.cfg.ctu_size
        self.ctus: list[ParsedCtu] = []

    # ------------------------------------------------------------ helpers

    def comp_source(self, p: int) -> np.ndarray:
        return self.source[p]

    def recon_plane(self, p: int) -> np.ndarray:
        return self.bufs.get(("y", "u", "v")[p], "recon")

    def cu_region(self, p: int, rect: Rect, plane_set="recon") -> np.ndarray:
        s = 1 if p == 0 else 2
        plane = self.bufs.get(("y", "u", "v")[p], plane_set)
        return plane[rect.y // s : rect.y1 // s, rect.x // s : rect.x1 // s]

    def _snapshot(self, rect: Rect):
        regs = [self.cu_region(p, rect).copy() for p in range(self.params.num_planes)]
        g = syntax.MV_GRID
        mv = (self.mf.mvx[rect.y // g : rect.y1 // g, rect.x // g : rect.x1 // g].copy(),
              self.mf.mvy[rect.y // g : rect.y1 // g, rect.x // g : rect.x1 // g].copy(),
              self.mf.present[rect.y // g : rect.y1 // g, rect.x // g : rect.x1 // g].copy())
        return regs, mv

    def _restore(self, rect: Rect, snap) -> None:
        regs, mv = snap
        for p in range(self.params.num_planes):
            self.cu_region(p, rect)[:] = regs[p]
        g = syntax.MV_GRID
        sl = np.s_[rect.y // g : rect.y1 // g, rect.x // g : rect.x1 // g]
        self.mf.mvx[sl], self.mf.mvy[sl], self.mf.present[sl] = mv

    # ------------------------------------------------------- mode decision

    def encode_picture(self) -> ParsedCtu:
        cs = self.cfg.ctu_size
        for r in range(self.rows):
            for c in range(self.cols):
                self.progress = ReconProgress(
                    self.seq.width, self.seq.height, cs, r, c
                )
                self.avail = _avail_fn(self.params, r, c, self.progress.done)
                cus: list[ParsedCu] = []
                self.quadtree_decide(Rect(c * cs, r * cs, cs, cs), 0, cus)
                if self.lut is not None:
                    # mirror the decode path: inverse-map the CTU's luma
                    # right after its reconstruction, before any filters
                    y_plane = self.recon_plane(0)
                    x1 = min((c + 1) * cs, self.seq.width)
                    y1 = min((r + 1) * cs, self.seq.height)
                    region = y_plane[r * cs : y1, c * cs : x1]
                    y_plane[r * cs : y1, c * cs : x1] = self.kset.lmcs_apply(
                        self.lut, region)
                self.ctus.append(ParsedCtu(
                    row=r, col=c, cus=cus,
                    sao=[SaoParams() for _ in range(self.params.num_planes)],
                ))
        return self.ctus

    def quadtree_decide(self, rect: Rect, depth: int, out: list[ParsedCu]) -> float:
        if rect.x >= self.seq.width or rect.y >= self.seq.height:
            return 0.0
        inside = rect.x1 <= self.seq.width and rect.y1 <= self.seq.height
        if not inside:
            cost = self.lam  # forced split: no flag, tiny bias keeps parity
            half = rect.w // 2
            for dy, dx in ((0, 0), (0, 1), (1, 0), (1, 1)):
                cost += self.quadtree_decide(
                    Rect(rect.x + dx * half, rect.y + dy * half, half, half),
                    depth + 1, out)
            return cost
        if rect.w == syntax.MIN_CU or self.cfg.effort == "fast":
            cu, cost = self.encode_leaf(rect)
            out.append(cu)
            return cost
        snap = self._snapshot(rect)
        prog_snap = self.progress.done.copy()
        leaf_cu, leaf_cost = self.encode_leaf(rect)
        leaf_cost += self.lam  # split flag
        leaf_state = self._snapshot(rect)
        leaf_prog = self.progress.done.copy()
        self._restore(rect, snap)
        self.progress.done[:] = prog_snap
        split_children: list[ParsedCu] = []
        split_cost = self.lam
        half = rect.w // 2
        for dy, dx in ((0, 0), (0, 1), (1, 0), (1, 1)):
            split_cost += self.quadtree_decide(
                Rect(rect.x + dx * half, rect.y + dy * half, half, half),
                depth + 1, split_children)
        if leaf_cost <= split_cost:
            self._restore(rect, leaf_state)
            self.progress.done[:] = leaf_prog
            out.append(leaf_cu)
            return leaf_cost
        out.extend(split_children)
        return split_cost

    def encode_leaf(self, rect: Rect) -> tuple[ParsedCu, float]:
        best = None
        candidates = [self._try_intra(rect)]
        if self.params.has_tool(TOOL_BDPCM):
            candidates.append(self._try_bdpcm(rect))
        if self.params.pic_type == 0 and self.params.has_tool(TOOL_IBC):
            cand = self._try_ibc(rect)
            if cand is not None:
                candidates.append(cand)
        if self.params.pic_type == 1:
            candidates.append(self._try_inter(rect))
        for cu, cost in candidates:
            if best is None or cost < best[1]:
                best = (cu, cost)
        cu, cost = best
        self._reconstruct_cu(cu)
        self.progress.mark_cu(rect)
        if cu.mode == MODE_INTER:
            self.mf.set_rect(rect, cu.mv)
        return cu, cost

    # ---------------------------------------------------------- candidates

    def _luma_pred(self, rect: Rect, mode: int) -> np.ndarray:
        mid = 1 << (self.seq.bit_depth - 1)
        top, left = gather_intra_refs(self.recon_plane(0), rect, 1, mid, self.avail)
        return self.kset.intra_predict(mode, top, left, rect.w, self.seq.bit_depth)

    def _residual_cost(self, cu: ParsedCu, rect: Rect, preds: list[np.ndarray]) -> float:
        """Quantize residuals for all planes, fill cu, return SSD + bit cost."""
        bd = self.seq.bit_depth
        qp = self.params.qp
        smax = (1 << bd) - 1
        intra = cu.mode != MODE_INTER
        total_ssd = 0
        bits = 4.0
        from .kernels.transforms import (
            dequant_vector,
            forward_transform_vector,
            inverse_transform_vector,
            quant_vector,
        )
        for p in range(self.params.num_planes):
            s = 1 if p == 0 else 2
            src = self.comp_source(p)[rect.y // s : rect.y1 // s,
                                      rect.x // s : rect.x1 // s]
            resid = src.astype(np.int32) - preds[p]
            n = rect.w // s
            kinds = mts_kinds(cu.mts_idx) if p == 0 else (KIND_DCT2, KIND_DCT2)
            if n <= 32:
                coeff = forward_transform_vector(resid, kinds[0], kinds[1], bd)
                levels = quant_vector(coeff.astype(np.int32), qp, intra)
            else:
                levels = np.empty((n, n), dtype=np.int16)
                for qy in (0, n // 2):
                    for qx in (0, n // 2):
                        sub = forward_transform_vector(
                            resid[qy : qy + 32, qx : qx + 32], KIND_DCT2, KIND_DCT2, bd)
                        levels[qy : qy + 32, qx : qx + 32] = quant_vector(
                            sub.astype(np.int32), qp, intra)
            if levels.any():
                cu.cbf[p] = 1
                cu.coeffs[p] = levels
                if n <= 32:
                    rec_resid = inverse_transform_vector(
                        dequant_vector(levels, qp).astype(np.int16),
                        kinds[0], kinds[1], bd)
                else:
                    rec_resid = np.empty((n, n), dtype=np.int32)
                    for qy in (0, n // 2):
                        for qx in (0, n // 2):
                            rec_resid[qy : qy + 32, qx : qx + 32] = inverse_transform_vector(
                                dequant_vector(levels[qy : qy + 32, qx : qx + 32], qp)
                                .astype(np.int16), KIND_DCT2, KIND_DCT2, bd)
                rec = np.clip(preds[p] + rec_resid, 0, smax)
            else:
                cu.cbf[p] = 0
                cu.coeffs[p] = None
                rec = np.clip(preds[p], 0, smax)
            total_ssd += _ssd(rec, src)
            bits += _coeff_bits(cu.coeffs[p])
        return total_ssd + self.lam * bits

    def _try_intra(self, rect: Rect) -> tuple[ParsedCu, float]:
        src = self.comp_source(0)[rect.y : rect.y1, rect.x : rect.x1]
        best_mode, best_sad = 0, None
        for mode in range(4):
            sad = _sad(self._luma_pred(rect, mode), src)
            if best_sad is None or sad < best_sad:
                best_mode, best_sad = mode, sad
        preds = self._mode_preds(rect, MODE_INTRA, intra_mode=best_mode)
        best = None
        if rect.w > 32 or self.cfg.effort == "fast":
            mts_options = (0,)
        else:
            mts_options = (0, 1, 2)
        for mts in mts_options:
            cu = ParsedCu(rect=rect, mode=MODE_INTRA, intra_mode=best_mode, mts_idx=mts)
            cost = self._residual_cost(cu, rect, preds)
            if cu.mts_idx and not cu.cbf[0]:
                continue  # mts_idx != 0 requires a luma residual
            if best is None or cost < best[1]:
                best = (cu, cost)
        return best

    def _try_bdpcm(self, rect: Rect) -> tuple[ParsedCu, float]:
        bd = self.seq.bit_depth
        qp = self.params.qp
        smax = (1 << bd) - 1
        best = None
        from .kernels.transforms import quant_vector
        for direction in (DIR_HOR, DIR_VER):
            cu = ParsedCu(rect=rect, mode=MODE_BDPCM, bdpcm_dir=direction)
            pred_mode = syntax.INTRA_VER if direction == DIR_VER else syntax.INTRA_HOR
            preds = self._mode_preds(rect, MODE_INTRA, intra_mode=pred_mode)
            ssd = 0
            bits = 4.0
            for p in range(self.params.num_planes):
                s = 1 if p == 0 else 2
                src = self.comp_source(p)[rect.y // s : rect.y1 // s,
                                          rect.x // s : rect.x1 // s]
                resid = src.astype(np.int32) - preds[p]
                target = quant_vector(4 * resid, qp, True).astype(np.int32)
                axis = 0 if direction == DIR_VER else 1
                levels = np.diff(target, axis=axis, prepend=0).astype(np.int16)
                if levels.any():
                    cu.cbf[p] = 1
                    cu.coeffs[p] = levels
                else:
                    cu.cbf[p] = 0
                    cu.coeffs[p] = None
                rec = self.kset.bdpcm(
                    levels if cu.cbf[p] else np.zeros_like(levels),
                    direction, qp, preds[p], bd)
                ssd += _ssd(rec, src)
                bits += _coeff_bits(cu.coeffs[p])
            cost = ssd + self.lam * bits
            if best is None or cost < best[1]:
                best = (cu, cost)
        return best

    def _try_ibc(self, rect: Rect):
        src = self.comp_source(0)[rect.y : rect.y1, rect.x : rect.x1]
        recon = self.recon_plane(0)
        step = 2 if self.params.chroma_format == 1 else 1
        best = None
        span = 2 * self.cfg.ctu_size
        for bvy in range(-span, 1, step * 2):
            for bvx in range(-span, span + 1, step * 2):
                if bvx == 0 and bvy == 0:
                    continue
                if not validate_bv((bvx, bvy), rect, self.progress):
                    continue
                cand = recon[rect.y + bvy : rect.y1 + bvy, rect.x + bvx : rect.x1 + bvx]
                sad = _sad(cand, src)
                key = (sad, abs(bvy), abs(bvx))
                if best is None or key < best[0]:
                    best = (key, (bvx, bvy))
        if best is None:
            return None
        bv = best[1]
        cu = ParsedCu(rect=rect, mode=MODE_IBC, bv=bv)
        preds = self._mode_preds(rect, MODE_IBC, bv=bv)
        cost = self._residual_cost(cu, rect, preds) + self.lam * _vec_bits(bv)
        return cu, cost

    def _try_inter(self, rect: Rect) -> tuple[ParsedCu, float]:
        mv = self.motion_search(rect)
        cu = ParsedCu(rect=rect, mode=MODE_INTER, mv=mv)
        preds = self._mode_preds(rect, MODE_INTER, mv=mv)
        mvp = syntax.derive_mvp(self.mf, rect)
        mvd = (mv[0] - mvp[0], mv[1] - mvp[1])
        cost = self._residual_cost(cu, rect, preds) + self.lam * _vec_bits(mvd)
        return cu, cost

    def motion_search(self, rect: Rect) -> tuple[int, int]:
        src = self.comp_source(0)[rect.y : rect.y1, rect.x : rect.x1]
        ref = self.ref.get("y", "final")
        mvp = syntax.derive_mvp(self.mf, rect)
        cx = mvp[0] >> 2
        cy = max(-MAX_MV_Y, min(MAX_MV_Y, mvp[1] >> 2))
        search = MV_SEARCH_RANGE if self.cfg.effort == "normal" else 4

        def sad_at(mv):
            block = self.kset.interp_luma(ref, mv, rect.x, rect.y, rect.w,
                                          rect.h, self.seq.bit_depth)
            return _sad(block, src)

        best = None
        for dy in range(cy - search, cy + search + 1):
            if abs(dy) > MAX_MV_Y:
                continue
            for dx in range(cx - search, cx + search + 1):
                key = (sad_at((4 * dx, 4 * dy)), abs(4 * dy - mvp[1]),
                       abs(4 * dx - mvp[0]), dy, dx)
                if best is None or key < best[0]:
                    best = (key, (4 * dx, 4 * dy))
        base = best[1]
        best_q = None
        cands = [(base[0] + qx, base[1] + qy)
                 for qy in (-1, 0, 1) for qx in (-1, 0, 1)]
        cands.append(mvp)                  # the predictor itself always competes
        for mv in cands:
            if abs(mv[1]) > 4 * MAX_MV_Y:
                continue
            key = (sad_at(mv), abs(mv[1] - mvp[1]), abs(mv[0] - mvp[0]),
                   mv[1], mv[0])
            if best_q is None or key < best_q[0]:
                best_q = (key, mv)
        return best_q[1]

    def _mode_preds(self, rect: Rect, mode: int, intra_mode: int = 0,
                    mv=(0, 0), bv=(0, 0)) -> list[np.ndarray]:
        bd = self.seq.bit_depth
        mid = 1 << (bd - 1)
        preds = []
        for p in range(self.params.num_planes):
            s = 1 if p == 0 else 2
            plane = self.recon_plane(p)
            if mode == MODE_INTRA:
                top, left = gather_intra_refs(plane, rect, s, mid, self.avail)
                preds.append(self.kset.intra_predict(intra_mode, top, left,
                                                     rect.w // s, bd))
            elif mode == MODE_IBC:
                pv = bv if p == 0 else (bv[0] // 2, bv[1] // 2)
                preds.append(self.kset.ibc_copy(plane, pv, rect.x // s, rect.y // s,
                                                rect.w // s, rect.h // s))
            else:  # inter
                ref = self.ref.get(("y", "u", "v")[p], "final")
                if p == 0:
                    preds.append(self.kset.interp_luma(ref, mv, rect.x, rect.y,
                                                       rect.w, rect.h, bd))
                else:
                    preds.append(self.kset.interp_chroma(
                        ref, mv, rect.x // 2, rect.y // 2,
                        rect.w // 2, rect.h // 2, bd))
        return preds

    def _reconstruct_cu(self, cu: ParsedCu) -> None:
        """Decision-time reconstruction (authoritative pass re-runs per CTU)."""
        bd = self.seq.bit_depth
        smax = (1 << bd) - 1
        if cu.mode == MODE_BDPCM:
            dirmode = syntax.INTRA_VER if cu.bdpcm_dir == DIR_VER else syntax.INTRA_HOR
            preds = self._mode_preds(cu.rect, MODE_INTRA, intra_mode=dirmode)
        elif cu.mode == MODE_INTRA:
            preds = self._mode_preds(cu.rect, MODE_INTRA, intra_mode=cu.intra_mode)
        elif cu.mode == MODE_IBC:
            preds = self._mode_preds(cu.rect, MODE_IBC, bv=cu.bv)
        else:
            preds = self._mode_preds(cu.rect, MODE_INTER, mv=cu.mv)
        from .kernels.transforms import dequant_vector, inverse_transform_vector
        from .reconstruct import _residual_block
        for p in range(self.params.num_planes):
            s = 1 if p == 0 else 2
            region = self.cu_region(p, cu.rect)
            if cu.mode == MODE_BDPCM:
                levels = cu.coeffs[p]
                if levels is None:
                    levels = np.zeros((cu.rect.h // s, cu.rect.w // s), dtype=np.int16)
                region[:] = self.kset.bdpcm(levels, cu.bdpcm_dir, self.params.qp,
                                            preds[p], bd)
                continue
            resid = _residual_block(cu, p, cu.rect.w // s, cu.rect.h // s,
                                    self.params.qp, self.kset, bd)
            if resid is None:
                region[:] = np.clip(preds[p], 0, smax)
            else:
                region[:] = np.clip(preds[p] + resid, 0, smax)


class Encoder:
    def __init__(self, width: int, height: int, bit_depth: int,
                 chroma_format: int, config: EncoderConfig) -> None:
        config.validate()
        if chroma_format == 0:
            config.tool_flags &= ~TOOL_CCALF
        self.config = config
        self.seq = SequenceHeader(
            width=width, height=height, bit_depth=bit_depth,
            chroma_format=chroma_format,
            log2_ctu_size=config.ctu_size.bit_length() - 1,
            frame_count=0, tool_flags=config.tool_flags, max_mv_y=MAX_MV_Y,
        )
        self.seq.validate()
        self.kset = KernelSet(simd=config.simd)

    def encode_sequence(self, frames) -> tuple[bytes, list[list[np.ndarray]]]:
        """Encode raw frames; returns (container bytes, reconstruction frames)."""
        frames = list(frames)
        if self.config.frames is not None:
            frames = frames[: self.config.frames]
        if not frames:
            raise ValueError("no frames to encode")
        self.seq.frame_count = len(frames)
        units = []
        recons: list[list[np.ndarray]] = []
        prev_bufs: PictureBuffers | None = None
        for idx, frame in enumerate(frames):
            self._check_frame(frame)
            pic_type = 0 if (self.config.gop == "ai" or idx == 0) else 1
            header = self._picture_header(pic_type, idx)
            pe = _PictureEncoder(self, header, frame, prev_bufs)
            pe.encode_picture()
            self._authoritative_recon(pe)
            self._choose_filters(pe)
            self._run_filters(pe)
            unit = self._serialize(pe)
            units.append(unit)
            recons.append([
                pe.bufs.get(comp, "final").copy() for comp in pe.bufs.comp_names()
            ])
            prev_bufs = pe.bufs
        blob = write_sequence_header(self.seq) + b"".join(units)
        return blob, recons

    def _check_frame(self, frame) -> None:
        n_planes = 1 if self.seq.chroma_format == 0 else 3
        if len(frame) != n_planes:
            raise ValueError(f"expected {n_planes} planes, got {len(frame)}")
        if frame[0].shape != (self.seq.height, self.seq.width):
            raise ValueError(
                f"luma shape {frame[0].shape} != {(self.seq.height, self.seq.width)}"
            )
        smax = (1 << self.seq.bit_depth) - 1
        for p in frame:
            if int(p.max(initial=0)) > smax:
                raise ValueError("sample exceeds bit depth range")

    def _picture_header(self, pic_type: int, poc: int) -> PictureHeader:
        lmcs = None
        if self.seq.has_tool(TOOL_LMCS):
            lmcs = lmcs_counts_for(self.config.lmcs_table, self.seq.bit_depth)
        return PictureHeader(pic_type=pic_type, poc=poc, qp=self.config.qp,
                             lmcs_counts=lmcs)

    def _authoritative_recon(self, pe: _PictureEncoder) -> None:
        """Re-run the decoder's reconstruction path over the chosen syntax."""
        decision = {
            p: pe.recon_plane(p).copy() for p in range(pe.params.num_planes)
        }
        for p in range(pe.params.num_planes):
            pe.recon_plane(p)[:] = 0
        for ctu in pe.ctus:
            reconstruct_ctu(ctu, pe.ctx)
        for p, dec_plane in decision.items():
            if not np.array_equal(dec_plane, pe.recon_plane(p)):
                raise AssertionError(
                    "decision-time reconstruction diverged from decode path"
                )

    # ------------------------------------------------------------- filters

    def _choose_filters(self, pe: _PictureEncoder) -> None:
        params = pe.params
        bufs = pe.bufs
        comps = bufs.comp_names()
        # deblock into the dblk planes (whole picture, via the shared band code)
        meta = build_boundary_meta(pe.ctus, params)
        for comp in comps:
            scale = 1 if comp == "y" else 2
            bufs.get(comp, "dblk")[:] = bufs.get(comp, "recon")
        if params.has_tool(TOOL_DBLK):
            for comp in comps:
                scale = 1 if comp == "y" else 2
                deblock_band(bufs, comp, meta, params, 0,
                             bufs.get(comp, "dblk").shape[0], self.kset)
        if params.has_tool(TOOL_SAO):
            for ctu in pe.ctus:
                ctu.sao = [
                    self.pick_sao_params(pe, ctu, p) for p in range(params.num_planes)
                ]
        # apply SAO whole-picture for ALF/CCALF decision support
        for ci, comp in enumerate(comps):
            scale = 1 if comp == "y" else 2
            dblk = bufs.get(comp, "dblk")
            sao = bufs.get(comp, "sao")
            if not params.has_tool(TOOL_SAO):
                sao[:] = dblk
                continue
            ccs = params.ctu_size // scale
            for ctu in pe.ctus:
                pr = ctu.sao[ci]
                x0, y0 = ctu.col * ccs, ctu.row * ccs
                x1 = min(x0 + ccs, dblk.shape[1])
                y1 = min(y0 + ccs, dblk.shape[0])
                sao[y0:y1, x0:x1] = self.kset.sao_block(
                    dblk, x0, y0, x1 - x0, y1 - y0, pr.mode, pr.band_start,
                    pr.eo_class, pr.offsets, params.bit_depth)
        self.select_alf(pe)
        self.select_ccalf(pe)

    def pick_sao_params(self, pe: _PictureEncoder, ctu: ParsedCtu, p: int) -> SaoParams:
        params = pe.params
        scale = 1 if p == 0 else 2
        ccs = params.ctu_size // scale
        comp = ("y", "u", "v")[p]
        dblk = pe.bufs.get(comp, "dblk")
        x0, y0 = ctu.col * ccs, ctu.row * ccs
        x1 = min(x0 + ccs, dblk.shape[1])
        y1 = min(y0 + ccs, dblk.shape[0])
        src = pe.comp_source(p)[y0:y1, x0:x1].astype(np.int64)
        base = dblk[y0:y1, x0:x1].astype(np.int64)
        err = src - base
        base_ssd = int((err * err).sum())
        best = (base_ssd, SaoParams())

        def offsets_for(cat: np.ndarray, n_cats: int):
            offs = []
            for k in range(n_cats):
                mask = cat == k
                n = int(mask.sum())
                if n == 0:
                    offs.append(0)
                    continue
                mean = float(err[mask].sum()) / n
                offs.append(max(-31, min(31, int(mean))))
            return offs

        def gain(cat: np.ndarray, offs) -> int:
            total = base_ssd
            for k, o in enumerate(offs):
                if o == 0:
                    continue
                mask = cat == k
                e = err[mask]
                total += int((o * o) * mask.sum() - 2 * o * e.sum())
            return total

        # band mode: best start over 32 positions
        band = (base >> (params.bit_depth - 5)).astype(np.int32)
        for start in range(32):
            cat = np.full(band.shape, -1, dtype=np.int32)
            for k in range(4):
                cat[band == ((start + k) % 32)] = k
            offs = offsets_for(np.where(cat < 0, 4, cat), 4)
            ssd = gain(np.where(cat < 0, 99, cat), offs)
            if ssd < best[0]:
                best = (ssd, SaoParams(mode=syntax.SAO_BAND, band_start=start,
                                       offsets=tuple(offs)))
        # edge modes
        ph, pw = dblk.shape
        for eo in range(4):
            (dya, dxa), (dyb, dxb) = SAO_EDGE_NEIGHBORS[eo]
            ys = np.arange(y0, y1)[:, None]
            xs = np.arange(x0, x1)[None, :]
            ay, ax = ys + dya, xs + dxa
            by, bx = ys + dyb, xs + dxb
            valid = ((ay >= 0) & (ay < ph) & (ax >= 0) & (ax < pw)
                     & (by >= 0) & (by < ph) & (bx >= 0) & (bx < pw))
            a = dblk[np.clip(ay, 0, ph - 1), np.clip(ax, 0, pw - 1)].astype(np.int64)
            b = dblk[np.clip(by, 0, ph - 1), np.clip(bx, 0, pw - 1)].astype(np.int64)
            c = np.sign(base - a) + np.sign(base - b)
            cat = np.full(c.shape, 99, dtype=np.int32)
            cat[(c == -2) & valid] = 0
            cat[(c == -1) & valid] = 1
            cat[(c == 1) & valid] = 2
            cat[(c == 2) & valid] = 3
            offs = offsets_for(cat, 4)
            ssd = gain(cat, offs)
            if ssd < best[0]:
                best = (ssd, SaoParams(mode=syntax.SAO_EDGE, eo_class=eo,
                                       offsets=tuple(offs)))
        return best[1]

    def select_alf(self, pe: _PictureEncoder) -> None:
        params = pe.params
        if not params.has_tool(TOOL_ALF):
            return
        sao = pe.bufs.get("y", "sao")
        src = pe.comp_source(0)
        cs = params.ctu_size
        best = None
        for cand in ALF_CANDIDATES:
            total = 0
            flags = {}
            for ctu in pe.ctus:
                x0, y0 = ctu.col * cs, ctu.row * cs
                x1 = min(x0 + cs, params.width)
                y1 = min(y0 + cs, params.height)
                ref = src[y0:y1, x0:x1]
                off_ssd = _ssd(sao[y0:y1, x0:x1], ref)
                if any(cand):
                    flt = alf_block_vector(sao, x0, y0, x1 - x0, y1 - y0, cand,
                                           params.bit_depth)
                    on_ssd = _ssd(flt, ref)
                else:
                    on_ssd = off_ssd
                if on_ssd < off_ssd:
                    flags[(ctu.row, ctu.col)] = 1
                    total += on_ssd
                else:
                    flags[(ctu.row, ctu.col)] = 0
                    total += off_ssd
            if best is None or total < best[0]:
                best = (total, cand, flags)
        _, cand, flags = best
        if not any(cand) or not any(flags.values()):
            return  # identity wins: don't signal ALF this picture
        pe.header.alf_coeffs = list(cand)
        pe.params.alf_present = True
        for ctu in pe.ctus:
            ctu.alf_flag = flags[(ctu.row, ctu.col)]

    def select_ccalf(self, pe: _PictureEncoder) -> None:
        params = pe.params
        if not (params.has_tool(TOOL_CCALF) and params.num_planes == 3):
            return
        # CCALF reads ALF-filtered luma: approximate with the ALF decision output
        cs = params.ctu_size
        luma_alf = pe.bufs.get("y", "sao").copy()
        if pe.params.alf_present:
            for ctu in pe.ctus:
                if not ctu.alf_flag:
                    continue
                x0, y0 = ctu.col * cs, ctu.row * cs
                x1 = min(x0 + cs, params.width)
                y1 = min(y0 + cs, params.height)
                luma_alf[y0:y1, x0:x1] = alf_block_vector(
                    pe.bufs.get("y", "sao"), x0, y0, x1 - x0, y1 - y0,
                    tuple(pe.header.alf_coeffs), params.bit_depth)
        chosen: list[tuple | None] = [None, None]
        all_flags = [{}, {}]
        ccs = cs // 2
        for p, comp in enumerate(("u", "v")):
            sao_c = pe.bufs.get(comp, "sao")
            src = pe.comp_source(p + 1)
            best = None
            for cand in CCALF_CANDIDATES:
                total = 0
                flags = {}
                for ctu in pe.ctus:
                    x0, y0 = ctu.col * ccs, ctu.row * ccs
                    x1 = min(x0 + ccs, sao_c.shape[1])
                    y1 = min(y0 + ccs, sao_c.shape[0])
                    ref = src[y0:y1, x0:x1]
                    off_ssd = _ssd(sao_c[y0:y1, x0:x1], ref)
                    if any(cand):
                        flt = ccalf_block_vector(sao_c, luma_alf, x0, y0,
                                                 x1 - x0, y1 - y0, cand,
                                                 params.bit_depth)
                        on_ssd = _ssd(flt, ref)
                    else:
                        on_ssd = off_ssd
                    if on_ssd < off_ssd:
                        flags[(ctu.row, ctu.col)] = 1
                        total += on_ssd
                    else:
                        flags[(ctu.row, ctu.col)] = 0
                        total += off_ssd
                if best is None or total < best[0]:
                    best = (total, cand, flags)
            _, cand, flags = best
            if any(cand) and any(flags.values()):
                chosen[p] = cand
                all_flags[p] = flags
        if chosen[0] is None and chosen[1] is None:
            return
        pe.header.ccalf_coeffs = [list(chosen[p] or (0,) * 8) for p in range(2)]
        pe.params.ccalf_present = True
        for ctu in pe.ctus:
            ctu.ccalf_flags = (
                all_flags[0].get((ctu.row, ctu.col), 0),
                all_flags[1].get((ctu.row, ctu.col), 0),
            )

    def _run_filters(self, pe: _PictureEncoder) -> None:
        """Authoritative banded filter pass, identical to the decoder's."""
        fctx = FilterContext.from_ctus(
            pe.ctus, pe.params,
            alf_coeffs=tuple(pe.header.alf_coeffs) if pe.header.alf_coeffs else None,
            ccalf_coeffs=tuple(map(tuple, pe.header.ccalf_coeffs))
            if pe.header.ccalf_coeffs else None,
        )
        for r in range(pe.rows):
            execute_filter_row(r, pe.bufs, fctx, self.kset)

    def _serialize(self, pe: _PictureEncoder) -> bytes:
        enc = RangeEncoder()
        bank = CtxBank()
        mf = MotionField(self.seq.width, self.seq.height)
        for ctu in pe.ctus:
            syntax.write_ctu(enc, bank, ctu, pe.params, mf)
        payload = enc.flush()
        return write_picture_header(pe.header, self.seq, payload)


def encode_sequence(frames, width: int, height: int, bit_depth: int,
                    chroma_format: int, config: EncoderConfig):
    enc = Encoder(width, height, bit_depth, chroma_format, config)
    return enc.encode_sequence(frames)
