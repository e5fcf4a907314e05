#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vrl/param.hpp"
#include "vrl/tape.hpp"

namespace vrl {

// A ParamSet bound to one tape: one leaf per block, aligned with the set's
// block order so gradients map straight back after backward().
struct BoundParams {
    const ParamSet* params = nullptr;
    std::vector<Var> vars;

    static BoundParams bind(Tape& tape, const ParamSet& ps) {
        BoundParams b;
        b.params = &ps;
        b.vars.reserve(ps.block_count());
        for (const Tensor& t : ps.values) b.vars.push_back(tape.leaf(t));
        return b;
    }

    Var operator[](const std::string& name) const {
        const int i = params->index(name);
        if (i < 0) throw ContractError("unbound parameter block '" + name + "'");
        return vars[static_cast<std::size_t>(i)];
    }

    // Gradient in the ParamSet's layout; call after tape.backward().
    ParamSet grads(const Tape& tape) const {
        ParamSet g;
        g.names = params->names;
        for (Var v : vars) g.values.push_back(tape.grad(v));
        return g;
    }
};

// LSTM cell parameters on the tape. Gate pre-activations are stacked as
// [input; forget; candidate; output], so wx is {4l, in_dim}, wh {4l, l},
// b {4l}.
struct LstmVars {
    Var wx, wh, b;
    int in_dim = 0;
    int l = 0;
};

struct LstmState {
    Var h, c;
};

// Block names: prefix.wx, prefix.wh, prefix.b. Forget-gate bias starts at 1.
void add_lstm_params(ParamSet& ps, const std::string& prefix, int in_dim, int l,
                     std::mt19937_64& rng);
LstmVars bind_lstm(const BoundParams& bp, const std::string& prefix, int in_dim, int l);

LstmState lstm_zero_state(Tape& tape, int l);
LstmState lstm_step(Tape& tape, const LstmVars& p, Var x, const LstmState& state);

// Runs the cell left-to-right from the zero state over the columns of a
// {d, T} feature matrix; returns the T hidden states.
std::vector<LstmState> aggregate(Tape& tape, const LstmVars& p, const Tensor& seq);

struct AttentionVars {
    Var wq, wr, wm, bm, w, b;
};

void add_attention_params(ParamSet& ps, const std::string& prefix, int l, std::mt19937_64& rng);
AttentionVars bind_attention(const BoundParams& bp, const std::string& prefix);

struct AttendResult {
    Var weighted_query;  // {l}
    Var weights;         // {q}, sums to 1
};

// Attention over the query hidden states for one reference step. hq_proj must
// hold wq . hq_j per query step (precompute once per episode); h_f_prev is the
// forward matching state from the previous step, zero at step 1.
AttendResult attend(Tape& tape, const AttentionVars& p, std::span<const Var> hq_cols,
                    std::span<const Var> hq_proj, Var h_r, Var h_f_prev);
// Convenience overload that projects hq itself.
AttendResult attend(Tape& tape, const AttentionVars& p, std::span<const Var> hq_cols, Var h_r,
                    Var h_f_prev);

struct CrossGateVars {
    Var wr, wq, br, bq;
};

void add_cross_gate_params(ParamSet& ps, const std::string& prefix, int l, std::mt19937_64& rng);
CrossGateVars bind_cross_gate(const BoundParams& bp, const std::string& prefix);

// Each stream is gated by the other stream's gate.
std::pair<Var, Var> cross_gate(Tape& tape, const CrossGateVars& p, Var weighted_query, Var h_r);

// Rank-k factorized bilinear interaction. F stacks the per-output-dimension
// projections F_j as rows [j*k, (j+1)*k); bf stacks the shared biases the same
// way. Scalar count is k*l*(l+1).
struct BilinearVars {
    Var f, bf;
    int l = 0;
    int k = 0;
};

void add_bilinear_params(ParamSet& ps, const std::string& prefix, int l, int k,
                         std::mt19937_64& rng);
BilinearVars bind_bilinear(const BoundParams& bp, const std::string& prefix, int l, int k);

Var bilinear_match(Tape& tape, const BilinearVars& p, Var gated_query, Var gated_ref);

}  // namespace vrl
