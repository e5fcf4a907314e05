#include "vrl/layers.hpp"

namespace vrl {

void add_lstm_params(ParamSet& ps, const std::string& prefix, int in_dim, int l,
                     std::mt19937_64& rng) {
    ps.add(prefix + ".wx", init_uniform({4 * l, in_dim}, in_dim, rng));
    ps.add(prefix + ".wh", init_uniform({4 * l, l}, l, rng));
    Tensor b = Tensor::zeros({4 * l});
    for (int i = l; i < 2 * l; ++i) b.at(i) = 1.0;  // forget gate bias
    ps.add(prefix + ".b", std::move(b));
}

LstmVars bind_lstm(const BoundParams& bp, const std::string& prefix, int in_dim, int l) {
    return LstmVars{bp[prefix + ".wx"], bp[prefix + ".wh"], bp[prefix + ".b"], in_dim, l};
}

LstmState lstm_zero_state(Tape& tape, int l) {
    const Var z = tape.leaf(Tensor::zeros({l}));
    return LstmState{z, z};
}

LstmState lstm_step(Tape& tape, const LstmVars& p, Var x, const LstmState& state) {
    if (tape.val(x).rows() != p.in_dim || tape.val(x).rank() != 1)
        throw DimensionError("lstm_step: input " + tape.val(x).shape_str() + ", expected [" +
                             std::to_string(p.in_dim) + "]");
    if (tape.val(state.h).rows() != p.l)
        throw DimensionError("lstm_step: state size " + tape.val(state.h).shape_str());
    const int l = p.l;
    const Var pre = tape.add(tape.add(tape.matmul(p.wx, x), tape.matmul(p.wh, state.h)), p.b);
    const Var gi = tape.sigmoid_(tape.slice(pre, 0, l));
    const Var gf = tape.sigmoid_(tape.slice(pre, l, 2 * l));
    const Var gg = tape.tanh_(tape.slice(pre, 2 * l, 3 * l));
    const Var go = tape.sigmoid_(tape.slice(pre, 3 * l, 4 * l));
    const Var c = tape.add(tape.mul(gf, state.c), tape.mul(gi, gg));
    const Var h = tape.mul(go, tape.tanh_(c));
    return LstmState{h, c};
}

std::vector<LstmState> aggregate(Tape& tape, const LstmVars& p, const Tensor& seq) {
    if (seq.rank() != 2 || seq.cols() < 1) throw ContractError("aggregate: empty sequence");
    if (seq.rows() != p.in_dim)
        throw DimensionError("aggregate: feature dim " + std::to_string(seq.rows()) +
                             ", expected " + std::to_string(p.in_dim));
    std::vector<LstmState> states;
    states.reserve(static_cast<std::size_t>(seq.cols()));
    LstmState st = lstm_zero_state(tape, p.l);
    for (int t = 0; t < seq.cols(); ++t) {
        st = lstm_step(tape, p, tape.leaf(seq.column(t)), st);
        states.push_back(st);
    }
    return states;
}

void add_attention_params(ParamSet& ps, const std::string& prefix, int l, std::mt19937_64& rng) {
    ps.add(prefix + ".wq", init_uniform({l, l}, l, rng));
    ps.add(prefix + ".wr", init_uniform({l, l}, l, rng));
    ps.add(prefix + ".wm", init_uniform({l, l}, l, rng));
    ps.add(prefix + ".bm", Tensor::zeros({l}));
    ps.add(prefix + ".w", init_uniform({1, l}, l, rng));
    ps.add(prefix + ".b", Tensor::zeros({1}));
}

AttentionVars bind_attention(const BoundParams& bp, const std::string& prefix) {
    return AttentionVars{bp[prefix + ".wq"], bp[prefix + ".wr"], bp[prefix + ".wm"],
                         bp[prefix + ".bm"], bp[prefix + ".w"],  bp[prefix + ".b"]};
}

AttendResult attend(Tape& tape, const AttentionVars& p, std::span<const Var> hq_cols,
                    std::span<const Var> hq_proj, Var h_r, Var h_f_prev) {
    const int q = static_cast<int>(hq_cols.size());
    if (q == 0) throw ContractError("attend: empty query");
    const Var context = tape.add(tape.add(tape.matmul(p.wr, h_r), tape.matmul(p.wm, h_f_prev)), p.bm);
    std::vector<Var> scores;
    scores.reserve(static_cast<std::size_t>(q));
    for (int j = 0; j < q; ++j) {
        const Var e = tape.tanh_(tape.add(hq_proj[static_cast<std::size_t>(j)], context));
        scores.push_back(tape.add(tape.matmul(p.w, e), p.b));
    }
    const Var alpha = tape.softmax(tape.concat(scores));
    // weighted_query = sum_j alpha_j * hq_j
    Var acc = tape.scalar_mul(tape.slice(alpha, 0, 1), hq_cols[0]);
    for (int j = 1; j < q; ++j)
        acc = tape.add(acc, tape.scalar_mul(tape.slice(alpha, j, j + 1),
                                            hq_cols[static_cast<std::size_t>(j)]));
    return AttendResult{acc, alpha};
}

AttendResult attend(Tape& tape, const AttentionVars& p, std::span<const Var> hq_cols, Var h_r,
                    Var h_f_prev) {
    std::vector<Var> proj;
    proj.reserve(hq_cols.size());
    for (Var hq : hq_cols) proj.push_back(tape.matmul(p.wq, hq));
    return attend(tape, p, hq_cols, proj, h_r, h_f_prev);
}

void add_cross_gate_params(ParamSet& ps, const std::string& prefix, int l, std::mt19937_64& rng) {
    ps.add(prefix + ".wr", init_uniform({l, l}, l, rng));
    ps.add(prefix + ".wq", init_uniform({l, l}, l, rng));
    ps.add(prefix + ".br", Tensor::zeros({l}));
    ps.add(prefix + ".bq", Tensor::zeros({l}));
}

CrossGateVars bind_cross_gate(const BoundParams& bp, const std::string& prefix) {
    return CrossGateVars{bp[prefix + ".wr"], bp[prefix + ".wq"], bp[prefix + ".br"],
                         bp[prefix + ".bq"]};
}

std::pair<Var, Var> cross_gate(Tape& tape, const CrossGateVars& p, Var weighted_query, Var h_r) {
    const Var gate_r = tape.sigmoid_(tape.add(tape.matmul(p.wr, h_r), p.br));
    const Var gate_q = tape.sigmoid_(tape.add(tape.matmul(p.wq, weighted_query), p.bq));
    const Var gated_query = tape.mul(weighted_query, gate_r);
    const Var gated_ref = tape.mul(h_r, gate_q);
    return {gated_query, gated_ref};
}

void add_bilinear_params(ParamSet& ps, const std::string& prefix, int l, int k,
                         std::mt19937_64& rng) {
    ps.add(prefix + ".f", init_uniform({l * k, l}, l, rng));
    ps.add(prefix + ".bf", Tensor::zeros({l * k}));
}

BilinearVars bind_bilinear(const BoundParams& bp, const std::string& prefix, int l, int k) {
    return BilinearVars{bp[prefix + ".f"], bp[prefix + ".bf"], l, k};
}

Var bilinear_match(Tape& tape, const BilinearVars& p, Var gated_query, Var gated_ref) {
    if (tape.val(gated_query).rows() != p.l || tape.val(gated_ref).rows() != p.l)
        throw DimensionError("bilinear_match: inputs must be [" + std::to_string(p.l) + "]");
    // All l projections at once: {l*k, l} x {l} -> {l*k}, plus the shared bias.
    const Var proj_q = tape.add(tape.matmul(p.f, gated_query), p.bf);
    const Var proj_r = tape.add(tape.matmul(p.f, gated_ref), p.bf);
    const Var prod = tape.mul(proj_q, proj_r);
    std::vector<Var> out;
    out.reserve(static_cast<std::size_t>(p.l));
    for (int j = 0; j < p.l; ++j) out.push_back(tape.sum(tape.slice(prod, j * p.k, (j + 1) * p.k)));
    return tape.concat(out);
}

}  // namespace vrl
