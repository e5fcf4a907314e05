#include "vrl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "vrl/layers.hpp"
#include "vrl/metrics.hpp"

namespace vrl {

namespace {

Tensor normalize_columns(const Tensor& m) {
    Tensor out = m;
    for (int t = 0; t < out.cols(); ++t) {
        double nrm = 0.0;
        for (int i = 0; i < out.rows(); ++i) nrm += out.at(i, t) * out.at(i, t);
        nrm = std::sqrt(nrm);
        if (nrm > 0)
            for (int i = 0; i < out.rows(); ++i) out.at(i, t) /= nrm;
    }
    return out;
}

}  // namespace

Tensor distance_table(const Tensor& query, const Tensor& ref) {
    if (query.rows() != ref.rows())
        throw DimensionError("distance_table: feature dims " + std::to_string(query.rows()) +
                             " vs " + std::to_string(ref.rows()));
    const Tensor qn = normalize_columns(query);
    const Tensor rn = normalize_columns(ref);
    Tensor d = Tensor::zeros({query.cols(), ref.cols()});
    for (int i = 0; i < qn.cols(); ++i)
        for (int j = 0; j < rn.cols(); ++j) {
            double acc = 0.0;
            for (int f = 0; f < qn.rows(); ++f) {
                const double diff = qn.at(f, i) - rn.at(f, j);
                acc += diff * diff;
            }
            d.at(i, j) = std::sqrt(acc);
        }
    return d;
}

long long count_legal_segments(int r, int max_len) {
    long long n = 0;
    for (int len = 1; len <= std::min(r, max_len); ++len) n += r - len + 1;
    return n;
}

Segment chance_baseline(int r, const DecodeConfig& cfg, std::mt19937_64& rng) {
    if (r < 1) throw ContractError("chance_baseline: r must be >= 1");
    const long long total = count_legal_segments(r, cfg.max_len);
    std::uniform_int_distribution<long long> pick(0, total - 1);
    long long idx = pick(rng);
    for (int len = 1; len <= std::min(r, cfg.max_len); ++len) {
        const long long with_len = r - len + 1;
        if (idx < with_len) {
            const int s = static_cast<int>(idx) + 1;
            return Segment{s, s + len - 1};
        }
        idx -= with_len;
    }
    throw ContractError("chance_baseline: unreachable");
}

Segment frame_level_baseline(const Tensor& query, const Tensor& ref, const DecodeConfig& cfg) {
    (void)cfg;  // the DP's span length is bounded by the path grammar itself
    if (query.cols() < 1 || ref.cols() < 1)
        throw ContractError("frame_level_baseline: empty sequence");
    const Tensor d = distance_table(query, ref);
    const int q = d.rows(), r = d.cols();
    const int max_len_path = q + r - 1;

    // cell[i*r + j]: best (sum, start column) for a path of exactly `len`
    // cells from row 0 to (i, j). Moves: diagonal, horizontal, vertical.
    constexpr double kInf = std::numeric_limits<double>::infinity();
    struct Cell {
        double sum = kInf;
        int start = -1;
    };
    auto better = [](const Cell& a, const Cell& b) {
        if (a.sum != b.sum) return a.sum < b.sum;
        return a.start < b.start;
    };
    std::vector<Cell> prev(static_cast<std::size_t>(q) * r), cur(static_cast<std::size_t>(q) * r);
    double best_mean = kInf;
    Segment best{1, 1};
    bool have = false;
    for (int len = 1; len <= max_len_path; ++len) {
        std::fill(cur.begin(), cur.end(), Cell{});
        if (len == 1) {
            for (int j = 0; j < r; ++j) cur[static_cast<std::size_t>(j)] = Cell{d.at(0, j), j};
        } else {
            for (int i = 0; i < q; ++i)
                for (int j = 0; j < r; ++j) {
                    Cell best_pred;
                    if (i > 0 && j > 0) best_pred = prev[static_cast<std::size_t>(i - 1) * r + j - 1];
                    if (j > 0) {
                        const Cell& c = prev[static_cast<std::size_t>(i) * r + j - 1];
                        if (better(c, best_pred)) best_pred = c;
                    }
                    if (i > 0) {
                        const Cell& c = prev[static_cast<std::size_t>(i - 1) * r + j];
                        if (better(c, best_pred)) best_pred = c;
                    }
                    if (best_pred.start >= 0)
                        cur[static_cast<std::size_t>(i) * r + j] =
                            Cell{best_pred.sum + d.at(i, j), best_pred.start};
                }
        }
        for (int j = 0; j < r; ++j) {
            const Cell& c = cur[static_cast<std::size_t>(q - 1) * r + j];
            if (c.start < 0) continue;
            const double mean = c.sum / len;
            const Segment span{c.start + 1, j + 1};
            const bool wins = !have || mean < best_mean ||
                              (mean == best_mean && (span.s < best.s ||
                                                     (span.s == best.s && span.e < best.e)));
            if (wins) {
                best_mean = mean;
                best = span;
                have = true;
            }
        }
        std::swap(prev, cur);
    }
    return best;
}

EncoderParams video_level_init(int d, const VideoBaselineConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    EncoderParams enc;
    enc.d = d;
    enc.hidden = cfg.hidden;
    add_lstm_params(enc.p, "enc", d, cfg.hidden, rng);
    return enc;
}

namespace {

Var encode_on_tape(Tape& tape, const BoundParams& bp, const EncoderParams& enc, const Tensor& seq) {
    const LstmVars lstm = bind_lstm(bp, "enc", enc.d, enc.hidden);
    const std::vector<LstmState> states = aggregate(tape, lstm, seq);
    return tape.l2_normalize(states.back().h);
}

Tensor slice_cols(const Tensor& m, int c0, int c1) {  // [c0, c1) columns
    Tensor out = Tensor::zeros({m.rows(), c1 - c0});
    for (int t = c0; t < c1; ++t)
        for (int i = 0; i < m.rows(); ++i) out.at(i, t - c0) = m.at(i, t);
    return out;
}

}  // namespace

Tensor video_encode(const EncoderParams& enc, const Tensor& seq) {
    // Forward-only eager LSTM; mirrors lstm_step's gate layout.
    const Tensor& wx = enc.p.at("enc.wx");
    const Tensor& wh = enc.p.at("enc.wh");
    const Tensor& b = enc.p.at("enc.b");
    const int l = enc.hidden;
    std::vector<double> h(static_cast<std::size_t>(l), 0.0), c(h), pre(static_cast<std::size_t>(4 * l));
    for (int t = 0; t < seq.cols(); ++t) {
        for (int g = 0; g < 4 * l; ++g) {
            double acc = b.at(g);
            for (int i = 0; i < seq.rows(); ++i) acc += wx.at(g, i) * seq.at(i, t);
            for (int i = 0; i < l; ++i) acc += wh.at(g, i) * h[static_cast<std::size_t>(i)];
            pre[static_cast<std::size_t>(g)] = acc;
        }
        auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
        for (int i = 0; i < l; ++i) {
            const double gi = sig(pre[static_cast<std::size_t>(i)]);
            const double gf = sig(pre[static_cast<std::size_t>(l + i)]);
            const double gg = std::tanh(pre[static_cast<std::size_t>(2 * l + i)]);
            const double go = sig(pre[static_cast<std::size_t>(3 * l + i)]);
            c[static_cast<std::size_t>(i)] = gf * c[static_cast<std::size_t>(i)] + gi * gg;
            h[static_cast<std::size_t>(i)] = go * std::tanh(c[static_cast<std::size_t>(i)]);
        }
    }
    double nrm = 0.0;
    for (double v : h) nrm += v * v;
    nrm = std::sqrt(nrm);
    Tensor out = Tensor::zeros({l});
    for (int i = 0; i < l; ++i) out.at(i) = nrm > 0 ? h[static_cast<std::size_t>(i)] / nrm : 0.0;
    return out;
}

namespace {

// Uniform segment sample satisfying a tIoU predicate against gt; nullopt-like
// failure reported via the bool.
std::pair<Segment, bool> sample_segment(int r, int max_len, const Segment& gt, bool want_positive,
                                        int tries, std::mt19937_64& rng) {
    const DecodeConfig cfg{max_len};
    for (int t = 0; t < tries; ++t) {
        const Segment s = chance_baseline(r, cfg, rng);
        const double iou = tiou(s, gt);
        if (want_positive ? iou > 0.8 : iou < 0.2) return {s, true};
    }
    return {Segment{}, false};
}

}  // namespace

EncoderParams video_level_train(const DatasetSplits& data, const VideoBaselineConfig& cfg,
                                const DecodeConfig& dcfg) {
    if (data.train.empty()) throw ContractError("video_level_train: empty training split");
    EncoderParams enc = video_level_init(data.train[0].query.rows(), cfg);
    AdamState adam = AdamState::init(enc.p, cfg.lr, 0.9, 0.999);
    std::mt19937_64 rng(cfg.seed + 1);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (const EpisodeRecord& ep : data.train) {
            const int r = ep.reference.cols();
            const auto [pos, ok_p] =
                sample_segment(r, dcfg.max_len, ep.gt, true, cfg.max_sample_tries, rng);
            const auto [neg, ok_n] =
                sample_segment(r, dcfg.max_len, ep.gt, false, cfg.max_sample_tries, rng);
            if (!ok_p || !ok_n) {
                if (epoch == 0)
                    std::cerr << "warning: no legal triplet for pair " << ep.pair_id << ", skipped\n";
                continue;
            }
            Tape tape;
            const BoundParams bp = BoundParams::bind(tape, enc.p);
            const Var a = encode_on_tape(tape, bp, enc, ep.query);
            const Var p = encode_on_tape(tape, bp, enc, slice_cols(ep.reference, pos.s - 1, pos.e));
            const Var n = encode_on_tape(tape, bp, enc, slice_cols(ep.reference, neg.s - 1, neg.e));
            const Var dp = tape.sum(tape.mul(tape.sub(a, p), tape.sub(a, p)));
            const Var dn = tape.sum(tape.mul(tape.sub(a, n), tape.sub(a, n)));
            const Var margin = tape.leaf(Tensor::from({1}, {cfg.margin}));
            const Var loss = tape.relu(tape.add(tape.sub(dp, dn), margin));
            if (tape.scalar(loss) == 0.0) continue;  // hinge inactive, zero gradient
            tape.backward(loss);
            ParamSet grads = bp.grads(tape);
            clip_global_norm(grads, 5.0);
            adam_step(enc.p, grads, adam);
        }
    }
    return enc;
}

std::pair<Segment, double> video_level_search(const EncoderParams& enc, const Tensor& query,
                                              const Tensor& ref, const DecodeConfig& dcfg,
                                              int stride) {
    if (stride < 1) throw ContractError("video_level_search: stride must be >= 1");
    const Tensor qe = video_encode(enc, query);
    const int r = ref.cols();
    Segment best{1, 1};
    double best_dist = std::numeric_limits<double>::infinity();
    for (int s = 1; s <= r; s += stride)
        for (int e = s; e <= std::min(r, s + dcfg.max_len - 1); e += stride) {
            const Tensor ce = video_encode(enc, slice_cols(ref, s - 1, e));
            double acc = 0.0;
            for (int i = 0; i < qe.count(); ++i) {
                const double diff = qe.at(i) - ce.at(i);
                acc += diff * diff;
            }
            const double dist = std::sqrt(acc);
            if (dist < best_dist) {
                best_dist = dist;
                best = Segment{s, e};
            }
        }
    return {best, best_dist};
}

}  // namespace vrl
