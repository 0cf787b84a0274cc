"""Gradient saliency maps and per-third importance analysis.

The map is |d logit_c / d pixel|, taken at the pre-softmax class score
and normalized by its maximum for display. Importance splits the raw
(unnormalized) saliency mass across the composite's column slabs; for
triplets this is the (i_diff, i_srch, i_tmpl) fraction triple, for pairs
a two-way (i_srch, i_tmpl) split. Dominance simply takes the largest
component, ties broken in the fixed order diff > srch > tmpl.
"""

import csv
from dataclasses import dataclass

import numpy as np

from realbogus.errors import ConfigurationError, DataError, NumericError
from realbogus.metrics import POSITIVE_LABEL
from realbogus.nn.network import predict
from realbogus.stamps import STAMP_SIZE

QUADRANTS = ("TP", "FN", "FP", "TN")


@dataclass
class SaliencyMap:
    values: np.ndarray      # max-normalized to 1, same shape as the composite
    raw: np.ndarray         # unnormalized |gradient|
    class_index: int
    layout: tuple


@dataclass
class ImportanceTriple:
    i_srch: float
    i_tmpl: float
    i_diff: float = None    # absent for pair composites

    def as_dict(self):
        out = {"i_srch": self.i_srch, "i_tmpl": self.i_tmpl}
        if self.i_diff is not None:
            out["i_diff"] = self.i_diff
        return out


def input_gradient(network, x, class_index):
    """d(pre-softmax logit of class_index) / d(input), eval mode."""
    if network.mode != "eval":
        raise ConfigurationError("saliency requires the network in eval mode")
    if class_index not in (0, 1):
        raise ConfigurationError(f"class index must be 0 or 1, got {class_index}")
    network.forward(x)
    onehot = np.zeros(2)
    onehot[class_index] = 1.0
    return network.backward(onehot)


def saliency_map(network, composite, class_index=None):
    """Vanilla-gradient saliency of one composite, max-normalized."""
    x = composite.as_input()
    if class_index is None:
        class_index = int(predict(network, x).argmax())
    grad = input_gradient(network, x, class_index)
    raw = np.abs(grad[:, :, 0])
    peak = raw.max()
    if peak == 0.0:
        values = np.zeros_like(raw)   # degenerate: identically-zero gradient
    else:
        values = raw / peak
    return SaliencyMap(values=values, raw=raw,
                       class_index=class_index, layout=composite.layout)


def importance(smap, layout=None):
    """Per-slab fractions of total saliency mass; components sum to 1."""
    layout = tuple(layout or smap.layout)
    values = smap.raw if isinstance(smap, SaliencyMap) else np.asarray(smap)
    if values.shape[1] != STAMP_SIZE * len(layout):
        raise DataError(
            f"map width {values.shape[1]} does not partition into {layout}")
    total = values.sum()
    if total == 0.0:
        raise NumericError("zero total saliency; importance undefined")
    fractions = {
        role: float(values[:, i * STAMP_SIZE:(i + 1) * STAMP_SIZE].sum() / total)
        for i, role in enumerate(layout)
    }
    return ImportanceTriple(i_diff=fractions.get("diff"),
                            i_srch=fractions["srch"], i_tmpl=fractions["tmpl"])


DOMINANCE_ORDER = ("diff", "srch", "tmpl")


def dominant_third(triple):
    """Role with the largest importance; ties broken diff > srch > tmpl."""
    values = {"srch": triple.i_srch, "tmpl": triple.i_tmpl}
    if triple.i_diff is not None:
        values["diff"] = triple.i_diff
    best = None
    for role in DOMINANCE_ORDER:
        if role in values and (best is None or values[role] > values[best]):
            best = role
    return best


def quadrant_of(label, prediction):
    if label == POSITIVE_LABEL:
        return "TP" if prediction == POSITIVE_LABEL else "FN"
    return "FP" if prediction == POSITIVE_LABEL else "TN"


@dataclass
class ExampleSaliency:
    id: str
    quadrant: str
    triple: ImportanceTriple
    dominant: str


@dataclass
class QuadrantSummary:
    dominance_counts: dict          # quadrant -> {role: count}
    importances: dict               # quadrant -> {component: list of values}
    empty_quadrants: list

    def quadrant_size(self, quadrant):
        return sum(self.dominance_counts[quadrant].values())


def analyze_examples(network, composites, predictions=None):
    """Per-example saliency importances for a labeled composite set."""
    network.eval_mode()
    rows = []
    for i, comp in enumerate(composites):
        if comp.label is None:
            raise DataError(f"composite {comp.id!r} has no label")
        pred = (int(predictions[i]) if predictions is not None
                else int(predict(network, comp.as_input()).argmax()))
        smap = saliency_map(network, comp, class_index=pred)
        triple = importance(smap)
        rows.append(ExampleSaliency(
            id=comp.id, quadrant=quadrant_of(comp.label, pred),
            triple=triple, dominant=dominant_third(triple)))
    return rows


def quadrant_summary(rows, layout):
    roles = [r for r in DOMINANCE_ORDER if r in layout]
    counts = {q: {r: 0 for r in roles} for q in QUADRANTS}
    dists = {q: {f"i_{r}": [] for r in roles} for q in QUADRANTS}
    for row in rows:
        counts[row.quadrant][row.dominant] += 1
        for key, value in row.triple.as_dict().items():
            dists[row.quadrant][key].append(value)
    empty = [q for q in QUADRANTS if sum(counts[q].values()) == 0]
    return QuadrantSummary(dominance_counts=counts, importances=dists,
                           empty_quadrants=empty)


# ---------------------------------------------------------------------------
# exports

def write_importance_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "quadrant", "i_diff", "i_srch", "i_tmpl", "dominant"])
        for r in rows:
            writer.writerow([
                r.id, r.quadrant,
                "" if r.triple.i_diff is None else r.triple.i_diff,
                r.triple.i_srch, r.triple.i_tmpl, r.dominant,
            ])


def write_quadrant_csv(summary, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        roles = sorted({r for c in summary.dominance_counts.values() for r in c})
        writer.writerow(["quadrant", "size"] + [f"dominant_{r}" for r in roles])
        for q, c in summary.dominance_counts.items():
            writer.writerow([q, sum(c.values())] + [c.get(r, 0) for r in roles])


def write_histogram_csv(summary, path, bins=20):
    """Per-quadrant histogram bins of each importance component."""
    edges = np.linspace(0.0, 1.0, bins + 1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quadrant", "component", "bin_lo", "bin_hi", "count"])
        for q, comps in summary.importances.items():
            for comp, values in comps.items():
                hist, _ = np.histogram(values, bins=edges)
                for lo, hi, count in zip(edges[:-1], edges[1:], hist):
                    writer.writerow([q, comp, lo, hi, int(count)])


def write_pgm(smap, path):
    """8-bit portable graymap of a saliency map, for visual inspection."""
    values = np.rint(smap.values * 255).astype(np.uint8)
    h, w = values.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(values.tobytes())
