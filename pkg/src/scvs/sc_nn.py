"""Stochastic hardware network model.

Mirrors the accelerator datapath: inputs and weights are converted to bipolar
bitstreams by two shared LFSRs (inputs, zero signal and every accumulator
reconversion ride R_x(t); weights ride R_w(t)), each neuron multiplies with an
XNOR array, sums with an accumulative parallel counter, right-shifts the
counter word to fit the stream resolution, converts back to the stochastic
domain and applies ReLU as a single OR gate against the correlated zero(t)
signal.  The final neuron's shifted counter word, read in the binary domain,
is the score.

Exactly two generators serve the whole network.  The simulator is bit-true
and deterministic; a real-arithmetic fixed-point reference with the same
quantization and shifts is provided to separate stochastic noise from
quantization error.
"""

from __future__ import annotations

import json
import math

import numpy as np

from . import sc_core as sc
from .ref_nn import Mlp, MODEL_FORMAT_VERSION
from .sc_core import BitStream, GateKind, Lfsr, WordSequence


class CorrelationViolation(ValueError):
    """An operation that requires shared-generator streams got foreign ones."""


# Default generator pair: distinct primitive polynomials, seeds picked by a
# decorrelation sweep (lowest multiplier error and per-neuron noise among
# candidate phase pairs).
def default_lfsr1(width: int = sc.DEFAULT_WIDTH) -> Lfsr:
    return Lfsr(width, sc.MAXIMAL_TAPS[width][0], seed=41 % (1 << width) or 1)


def default_lfsr2(width: int = sc.DEFAULT_WIDTH) -> Lfsr:
    return Lfsr(width, sc.MAXIMAL_TAPS[width][1], seed=1987 % (1 << width) or 1)


class ScLayer:
    """Quantized weights and normalization of one hardware layer.

    ``scale`` is the per-layer dequantization factor: float weight ~=
    decoded word * scale.  ``norm_shift`` is the arithmetic right shift
    applied to the APC word before reconversion.
    """

    def __init__(self, fan_in: int, fan_out: int, norm_shift: int, scale: float,
                 weights_q: np.ndarray, bias_q: np.ndarray | None):
        self.fan_in = int(fan_in)
        self.fan_out = int(fan_out)
        self.norm_shift = int(norm_shift)
        self.scale = float(scale)
        self.weights_q = np.asarray(weights_q, dtype=np.int32).reshape(fan_out, fan_in)
        self.bias_q = None if bias_q is None else np.asarray(bias_q, dtype=np.int32).reshape(fan_out)
        if self.norm_shift < 0:
            raise ValueError("norm_shift must be >= 0")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @property
    def n_inputs(self) -> int:
        """Physical input count including the constant bias line."""
        return self.fan_in + (1 if self.bias_q is not None else 0)


class ScNetwork:
    """Layer stack plus the two LFSR configurations of the hardware model."""

    def __init__(self, layers, lfsr1: Lfsr, lfsr2: Lfsr,
                 stream_len: int = 4095, width: int = sc.DEFAULT_WIDTH):
        if not layers or layers[-1].fan_out != 1:
            raise ValueError("network must end in a single output neuron")
        for a, b in zip(layers[:-1], layers[1:]):
            if a.fan_out != b.fan_in:
                raise ValueError(f"layer shapes do not chain: {a.fan_out} -> {b.fan_in}")
        if (lfsr1.taps, lfsr1.seed) == (lfsr2.taps, lfsr2.seed):
            raise ValueError("lfsr1 and lfsr2 must differ in polynomial or seed")
        if lfsr1.width != width or lfsr2.width != width:
            raise ValueError("LFSR widths must match the word width")
        if stream_len < 1:
            raise ValueError("stream_len must be >= 1")
        half = 1 << (width - 1)
        for i, l in enumerate(layers):
            if l.weights_q.min() < -half or l.weights_q.max() > half - 1:
                raise ValueError(f"layer {i} weight words exceed {width}-bit range")
        self.layers = list(layers)
        self.lfsr1 = lfsr1
        self.lfsr2 = lfsr2
        self.stream_len = int(stream_len)
        self.width = int(width)
        self._sim = None

    @property
    def input_width(self) -> int:
        return self.layers[0].fan_in

    @property
    def output_scale(self) -> float:
        """Accumulated factor between the decoded score and the float net's score."""
        half = 1 << (self.width - 1)
        a = 1.0
        for l in self.layers:
            gain = self.stream_len / ((1 << l.norm_shift) * half)
            a *= gain / l.scale
        return a

    def simulator(self, recon_phase: int = 0) -> "ScSimulator":
        if self._sim is None or self._sim.recon_phase != recon_phase:
            self._sim = ScSimulator(self, recon_phase=recon_phase)
        return self._sim


def min_norm_shift(n_inputs: int, stream_len: int, width: int) -> int:
    """Smallest shift for which the normalized word can never overflow b bits."""
    half = 1 << (width - 1)
    return max(0, math.ceil(math.log2(n_inputs * stream_len / half)))


# ---------------------------------------------------------------------------
# Per-stream exact values over a finite RNG window


def _window_value_fn(words: np.ndarray):
    """Exact decoded value of a comparator stream for any word, over the
    actual RNG window (count of R(t) strictly below the word)."""
    srt = np.sort(words)
    n = len(words)

    def value(word):
        below = np.searchsorted(srt, np.asarray(word), side="left")
        return (2.0 * below - n) / n

    return value


# ---------------------------------------------------------------------------
# Spec-level operations


def relu_via_or(s: BitStream, zero: BitStream) -> BitStream:
    """ReLU as a single OR gate; both streams must share R_x(t)."""
    if s.origin != zero.origin:
        raise CorrelationViolation(
            f"OR-ReLU needs fully correlated streams; got {s.origin!r} vs {zero.origin!r}"
        )
    out = sc.gate_eval(GateKind.OR, s, zero)
    # The OR of two nested comparator streams is itself a comparator stream
    # of the same generator, so the lineage is preserved.
    return BitStream(out.packed, out.n, origin=s.origin)


def sc_neuron_forward(x_streams, w_row, lfsr1_words: WordSequence, lfsr2_words: WordSequence,
                      norm_shift: int, width: int = sc.DEFAULT_WIDTH,
                      apply_relu: bool = True, diagnostics: dict | None = None) -> BitStream:
    """One stochastic neuron: XNOR array -> APC -> shift -> saturate ->
    reconversion against R_x(t) -> OR with the correlated zero signal."""
    x_streams = list(x_streams)
    w_row = [w if isinstance(w, sc.FixedWord) else sc.FixedWord(int(w), width) for w in w_row]
    if len(x_streams) != len(w_row):
        raise ValueError(f"{len(x_streams)} inputs vs {len(w_row)} weights")
    n = x_streams[0].n
    products = [
        sc.gate_eval(GateKind.XNOR, x, sc.to_stochastic(w, lfsr2_words, n))
        for x, w in zip(x_streams, w_row)
    ]
    apc = sc.apc_accumulate(products, n)
    word = apc >> norm_shift
    half = 1 << (width - 1)
    if word < -half or word > half - 1:
        if diagnostics is not None:
            diagnostics["saturations"] = diagnostics.get("saturations", 0) + 1
        word = max(-half, min(half - 1, word))
    s = sc.to_stochastic(sc.FixedWord(word, width), lfsr1_words, n)
    if not apply_relu:
        return s
    zero = sc.to_stochastic(sc.FixedWord(0, width), lfsr1_words, n)
    return relu_via_or(s, zero)


# ---------------------------------------------------------------------------
# Quantization


def quantize_weights(mlp: Mlp, width: int = sc.DEFAULT_WIDTH, clip_quantile: float = 1.0,
                     stream_len: int = 4095, lfsr1: Lfsr | None = None,
                     lfsr2: Lfsr | None = None, use_bias: bool = True,
                     calib: np.ndarray | None = None, margin: float = 1.0,
                     gain_cap: float = 0.5) -> ScNetwork:
    """Post-training quantization of a ReLU reference net.

    Per layer, weights are divided by the clip_quantile-quantile of their
    magnitudes, clipped to [-1, 1) and rounded to b-bit words; the applied
    scale goes into the layer bookkeeping so the decision function is
    preserved up to quantization (the decoded score is the float score times
    ``ScNetwork.output_scale``).  Biases become an extra weight against a
    constant +1 input line, pre-scaled by the accumulated attenuation of the
    preceding layers.

    Without calibration data the shift is the worst-case no-overflow value,
    which wastes most of the word range on deep nets; passing ``calib``
    (feature-scaled training rows) picks the smallest per-layer shift whose
    calibration words stay within ``margin`` of full scale, the normalization
    the hardware needs to fit the bit-stream resolution.  ``gain_cap`` bounds
    the per-layer decoded gain so that weak layers are never amplified to the
    point where stochastic multiplication noise dominates the word.
    """
    if not mlp.trained:
        raise ValueError("refusing to quantize an untrained network")
    if mlp.activation != "relu":
        raise ValueError(
            "hardware model needs ReLU hidden layers; retrain the reference net with ReLU"
        )
    if not 0 < clip_quantile <= 1:
        raise ValueError("clip_quantile must be in (0, 1]")
    lfsr1 = lfsr1 or default_lfsr1(width)
    lfsr2 = lfsr2 or default_lfsr2(width)
    half = 1 << (width - 1)
    n = stream_len

    zero_val = _window_value_fn(lfsr1.word_sequence(n).words)(0)
    x_hat = None
    if calib is not None:
        calib = np.atleast_2d(np.asarray(calib, dtype=np.float64))
        x_hat = _window_value_fn(lfsr1.word_sequence(n).words)(sc.encode_array(calib, width))

    attenuation = 1.0
    layers = []
    for li in range(mlp.n_layers):
        w = mlp.weights[li]
        bias = mlp.biases[li] if use_bias else None
        pool = np.abs(w).reshape(-1)
        if bias is not None:
            pool = np.concatenate([pool, np.abs(bias) * attenuation])
        s = float(np.quantile(pool, clip_quantile)) if np.any(pool > 0) else 1.0
        if s == 0.0:
            s = 1.0
        w_q = sc.encode_array(w / s, width)
        bias_q = None if bias is None else sc.encode_array(bias * attenuation / s, width)

        n_inputs = w.shape[1] + (1 if bias_q is not None else 0)
        shift = min_norm_shift(n_inputs, n, width)
        if x_hat is not None:
            w_hat = _window_value_fn(lfsr2.word_sequence(n, phase=(li * n) % lfsr2.period).words)
            dot = x_hat @ w_hat(w_q).T
            if bias_q is not None:
                dot = dot + w_hat(bias_q)
            peak = float(np.max(np.abs(dot))) * n
            cap_floor = max(0, math.ceil(math.log2(n / (gain_cap * half))))
            if peak > 0:
                needed = max(cap_floor, math.ceil(math.log2(peak / (margin * (half - 1)))))
                shift = min(shift, needed)
        gain = n / ((1 << shift) * half)
        layers.append(ScLayer(w.shape[1], w.shape[0], shift, s, w_q, bias_q))
        if x_hat is not None:
            words = np.clip(np.floor(dot * n / (1 << shift)), -half, half - 1)
            r1 = _window_value_fn(lfsr1.word_sequence(n).words)
            if li < mlp.n_layers - 1:
                x_hat = np.maximum(r1(words.astype(np.int64)), zero_val)
        attenuation *= gain / s

    return ScNetwork(layers, lfsr1, lfsr2, stream_len=n, width=width)


# ---------------------------------------------------------------------------
# Bit-true simulator


def _pack_rows(bits: np.ndarray) -> np.ndarray:
    """(..., N) bools -> (..., ceil(N/64)) uint64, little-endian bit order."""
    return sc._pack(bits)


class ScSimulator:
    """Materialized word sequences and packed weight streams for one network.

    Counts generator materializations (two for any network) and saturation
    events.  Inference is a pure function of (network, input, phase); repeat
    runs are bit-identical.
    """

    def __init__(self, net: ScNetwork, recon_phase: int = 0):
        self.net = net
        self.recon_phase = recon_phase % net.lfsr1.period
        self.saturation_count = 0
        self.rng_instantiations = 0
        self._seen: set = set()
        n = net.stream_len

        self._r1 = self._materialize(net.lfsr1, n, 0)
        self._r1_recon = self._r1 if self.recon_phase == 0 else \
            net.lfsr1.word_sequence(n, self.recon_phase)
        self._w_packs = []
        for li, layer in enumerate(net.layers):
            seq = self._materialize(net.lfsr2, n, (li * n) % net.lfsr2.period)
            wq = layer.weights_q
            if layer.bias_q is not None:
                wq = np.concatenate([wq, layer.bias_q[:, None]], axis=1)
            bits = wq[:, :, None] > seq.words[None, None, :]
            self._w_packs.append(_pack_rows(bits))
        # zero(t) and the constant +1 line ride the reconversion words
        zero_bits = 0 > self._r1_recon.words
        self._zero_pack = _pack_rows(zero_bits)
        self._ones_pack = _pack_rows(np.ones(n, dtype=bool))
        self._r1_value = _window_value_fn(self._r1.words)
        self._r1_recon_value = _window_value_fn(self._r1_recon.words)

    def _materialize(self, lfsr: Lfsr, count: int, phase: int) -> WordSequence:
        key = (lfsr.width, lfsr.taps, lfsr.seed)
        if key not in self._seen:
            self._seen.add(key)
            self.rng_instantiations += 1
        return lfsr.word_sequence(count, phase)

    # -- core layer math ----------------------------------------------------

    def _convert(self, words: np.ndarray, seq_words: np.ndarray) -> np.ndarray:
        """(k, m) words -> (k, m, W) packed comparator streams."""
        bits = words[..., None] > seq_words[None, None, :]
        return _pack_rows(bits)

    def _layer_words(self, li: int, in_packs: np.ndarray) -> np.ndarray:
        """(k, n_eff, W) packed inputs -> (k, fan_out) saturated APC words."""
        net = self.net
        layer = net.layers[li]
        n = net.stream_len
        half = 1 << (net.width - 1)
        w = self._w_packs[li]                      # (fan_out, n_eff, W)
        k = in_packs.shape[0]
        flat_w = w.reshape(w.shape[0], -1)
        flat_x = in_packs.reshape(k, 1, -1)
        pc = sc._popcount(flat_x ^ flat_w[None, :, :]).sum(axis=2, dtype=np.int64)
        apc = layer.n_inputs * n - 2 * pc          # (k, fan_out)
        words = apc >> layer.norm_shift
        over = (words < -half) | (words > half - 1)
        self.saturation_count += int(over.sum())
        return np.clip(words, -half, half - 1)

    def _run(self, x: np.ndarray, trace: bool = False):
        net = self.net
        n = net.stream_len
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != net.input_width:
            raise ValueError(f"input width {x.shape[1]} != {net.input_width}")
        k = x.shape[0]
        in_words = sc.encode_array(x, net.width)
        in_packs = self._convert(in_words, self._r1.words)
        traces = []
        scores = None
        for li, layer in enumerate(net.layers):
            if layer.bias_q is not None:
                ones = np.broadcast_to(self._ones_pack, (k, 1) + self._ones_pack.shape)
                in_packs = np.concatenate([in_packs, ones], axis=1)
            if trace:
                flat_w = self._w_packs[li].reshape(self._w_packs[li].shape[0], -1)
                flat_x = in_packs.reshape(k, 1, -1)
                pc = sc._popcount(flat_x ^ flat_w[None, :, :]) \
                    .reshape(k, layer.fan_out, layer.n_inputs, -1).sum(axis=3, dtype=np.int64)
                product_values = (n - 2 * pc) / n   # (k, fan_out, n_eff)
            words = self._layer_words(li, in_packs)
            if li < len(net.layers) - 1:
                s_packs = self._convert(words, self._r1_recon.words)
                out_packs = s_packs | self._zero_pack[None, None, :]
                if trace:
                    traces.append({
                        "products": product_values,
                        "words": words,
                        "out_values": np.maximum(self._r1_recon_value(words),
                                                 self._r1_recon_value(np.zeros_like(words))),
                    })
                in_packs = out_packs
            else:
                scores = words[:, 0] / (1 << (net.width - 1))
                if trace:
                    traces.append({"products": product_values, "words": words,
                                   "out_values": scores})
        return (scores, traces) if trace else scores

    def infer(self, x) -> float:
        return float(self._run(np.asarray(x, dtype=np.float64)[None, :])[0])

    def infer_many(self, x: np.ndarray, chunk: int = 16) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        out = np.empty(len(x))
        for i in range(0, len(x), chunk):
            out[i:i + chunk] = self._run(x[i:i + chunk])
        return out

    def trace(self, x):
        """Per-layer product stream values, APC words and decoded outputs."""
        scores, traces = self._run(np.asarray(x, dtype=np.float64)[None, :], trace=True)
        return float(scores[0]), traces


def sc_network_infer(net: ScNetwork, x, recon_phase: int = 0) -> float:
    """Decoded score of the hardware network for one feature-scaled input."""
    return net.simulator(recon_phase).infer(x)


# ---------------------------------------------------------------------------
# Fixed-point reference: same quantization, same shifts, real arithmetic


def fixed_point_reference(net: ScNetwork, x, recon_phase: int = 0):
    """Ideal-product reference: exact stream values for every conversion, real
    products, real accumulation with the same floor shift and saturation.
    The difference between this and the bit-true simulator is the stochastic
    multiplication noise alone."""
    n = net.stream_len
    half = 1 << (net.width - 1)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != net.input_width:
        raise ValueError(f"input width {x.shape[1]} != {net.input_width}")
    r1_value = _window_value_fn(net.lfsr1.word_sequence(n).words)
    recon_value = _window_value_fn(net.lfsr1.word_sequence(n, recon_phase % net.lfsr1.period).words)
    zero_val = float(recon_value(0))

    v = r1_value(sc.encode_array(x, net.width))
    for li, layer in enumerate(net.layers):
        w_value = _window_value_fn(
            net.lfsr2.word_sequence(n, phase=(li * n) % net.lfsr2.period).words)
        w_hat = w_value(layer.weights_q)
        dot = v @ w_hat.T
        if layer.bias_q is not None:
            dot = dot + w_value(layer.bias_q)
        words = np.clip(np.floor(dot * n / (1 << layer.norm_shift)), -half, half - 1)
        if li < len(net.layers) - 1:
            v = np.maximum(recon_value(words.astype(np.int64)), zero_val)
        else:
            out = words[:, 0] / half
    return out if out.size > 1 else float(out[0])


# ---------------------------------------------------------------------------
# Network files


def save_sc_network(net: ScNetwork, path) -> None:
    doc = {
        "kind": "sc_network",
        "version": MODEL_FORMAT_VERSION,
        "width": net.width,
        "stream_len": net.stream_len,
        "lfsr1": {"taps": list(net.lfsr1.taps), "seed": net.lfsr1.seed},
        "lfsr2": {"taps": list(net.lfsr2.taps), "seed": net.lfsr2.seed},
        "layers": [
            {
                "fan_in": l.fan_in,
                "fan_out": l.fan_out,
                "norm_shift": l.norm_shift,
                "scale": l.scale,
                "weights": [int(v) for v in l.weights_q.reshape(-1)],
                "bias": None if l.bias_q is None else [int(v) for v in l.bias_q],
            }
            for l in net.layers
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_sc_network(path) -> ScNetwork:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("kind") != "sc_network":
        raise ValueError(f"{path}: not a hardware-network file (kind={doc.get('kind')!r})")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format version {doc.get('version')!r}")
    width = int(doc["width"])
    layers = [
        ScLayer(
            l["fan_in"], l["fan_out"], l["norm_shift"], l["scale"],
            np.array(l["weights"], dtype=np.int32).reshape(l["fan_out"], l["fan_in"]),
            None if l["bias"] is None else np.array(l["bias"], dtype=np.int32),
        )
        for l in doc["layers"]
    ]
    lfsr1 = Lfsr(width, tuple(doc["lfsr1"]["taps"]), doc["lfsr1"]["seed"])
    lfsr2 = Lfsr(width, tuple(doc["lfsr2"]["taps"]), doc["lfsr2"]["seed"])
    return ScNetwork(layers, lfsr1, lfsr2, stream_len=int(doc["stream_len"]), width=width)
