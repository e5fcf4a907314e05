#include "vrl/training.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <map>
#include <random>

#include "vrl/metrics.hpp"

namespace vrl {

std::vector<StepLabel> make_labels(int r, const Segment& seg) {
    seg.validate(r);
    std::vector<StepLabel> labels(static_cast<std::size_t>(r), StepLabel{0, 0, 0, 1});
    if (seg.s == seg.e) {
        labels[static_cast<std::size_t>(seg.s - 1)] = {1.0 / 3, 1.0 / 3, 1.0 / 3, 0};
    } else {
        labels[static_cast<std::size_t>(seg.s - 1)] = {0.5, 0, 0.5, 0};
        labels[static_cast<std::size_t>(seg.e - 1)] = {0, 0.5, 0.5, 0};
        for (int i = seg.s + 1; i < seg.e; ++i) labels[static_cast<std::size_t>(i - 1)] = {0, 0, 1, 0};
    }
    return labels;
}

namespace {

double step_weight(const StepLabel& g, double c_w) { return (g[0] + g[1] > 0) ? c_w : 1.0; }

}  // namespace

double weighted_loss(const std::vector<StepProbs>& probs, const std::vector<StepLabel>& labels,
                     double c_w) {
    if (probs.size() != labels.size()) throw ContractError("weighted_loss: length mismatch");
    if (probs.empty()) throw ContractError("weighted_loss: empty sequence");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        double step = 0.0;
        for (int n = 0; n < 4; ++n) {
            if (labels[i][static_cast<std::size_t>(n)] == 0.0) continue;
            if (probs[i][static_cast<std::size_t>(n)] <= 0.0)
                throw DomainError("weighted_loss: zero probability with nonzero target");
            step += labels[i][static_cast<std::size_t>(n)] *
                    std::log(probs[i][static_cast<std::size_t>(n)]);
        }
        total += step_weight(labels[i], c_w) * step;
    }
    return -total / static_cast<double>(probs.size());
}

Var weighted_loss_on_tape(Tape& tape, std::span<const Var> prob_vars,
                          const std::vector<StepLabel>& labels, double c_w) {
    if (prob_vars.size() != labels.size()) throw ContractError("weighted_loss: length mismatch");
    if (prob_vars.empty()) throw ContractError("weighted_loss: empty sequence");
    const double r = static_cast<double>(labels.size());
    Var total = -1;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const Var g = tape.leaf(Tensor::from(
            {4}, {labels[i][0], labels[i][1], labels[i][2], labels[i][3]}));
        // 0 * log(p) stays 0 for any p > 0; softmax guarantees p > 0.
        const Var step = tape.sum(tape.mul(g, tape.log_(prob_vars[i])));
        const Var weighted = tape.scale(step, -step_weight(labels[i], c_w) / r);
        total = (total < 0) ? weighted : tape.add(total, weighted);
    }
    return total;
}

AdamState AdamState::init(const ParamSet& params, double lr, double beta1, double beta2) {
    AdamState st;
    st.m = params.zeros_like();
    st.v = params.zeros_like();
    st.lr = lr;
    st.beta1 = beta1;
    st.beta2 = beta2;
    return st;
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state) {
    if (grads.names != params.names) throw ContractError("adam_step: gradient layout mismatch");
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, state.step);
    const double bc2 = 1.0 - std::pow(state.beta2, state.step);
    for (std::size_t b = 0; b < params.block_count(); ++b) {
        Tensor& w = params.values[b];
        const Tensor& g = grads.values[b];
        if (!w.same_shape(g))
            throw DimensionError("adam_step: gradient shape mismatch in '" + params.names[b] + "'");
        Tensor& m = state.m.values[b];
        Tensor& v = state.v.values[b];
        for (int i = 0; i < w.count(); ++i) {
            const double gi = g.at(i);
            if (std::isnan(gi))
                throw DomainError("NaN gradient in parameter block '" + params.names[b] + "'");
            m.at(i) = state.beta1 * m.at(i) + (1.0 - state.beta1) * gi;
            v.at(i) = state.beta2 * v.at(i) + (1.0 - state.beta2) * gi * gi;
            const double mhat = m.at(i) / bc1;
            const double vhat = v.at(i) / bc2;
            w.at(i) -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

double clip_global_norm(ParamSet& grads, double max_norm) {
    double sq = 0.0;
    for (const Tensor& g : grads.values)
        for (double v : g.data) sq += v * v;
    const double norm = std::sqrt(sq);
    if (std::isfinite(max_norm) && norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (Tensor& g : grads.values)
            for (double& v : g.data) v *= s;
    }
    return norm;
}

EvalRun run_model(const ModelParams& params, const std::vector<EpisodeRecord>& episodes,
                  const DecodeConfig& dcfg) {
    EvalRun run;
    std::vector<Segment> gts;
    for (const EpisodeRecord& ep : episodes) {
        Tape tape;
        const ForwardResult fwd = model_forward(tape, params, ep.query, ep.reference);
        const Decoded dec = decode(fwd.probs, dcfg);
        run.preds.push_back(dec.seg);
        run.log_scores.push_back(dec.log_score);
        gts.push_back(ep.gt);
    }
    run.map_avg = evaluate(run.preds, gts).average;
    return run;
}

TrainResult train(const TrainConfig& cfg, const DatasetSplits& data,
                  const std::function<void(const EpochStats&)>& on_epoch) {
    if (data.train.empty()) throw ContractError("train: empty training split");
    if (data.train[0].query.rows() < 1) throw ContractError("train: empty features");

    const ModelConfig mcfg{data.train[0].query.rows(), cfg.l, cfg.k};
    ModelParams params = ModelParams::init(mcfg, cfg.seed);
    AdamState adam = AdamState::init(params.p, cfg.lr, cfg.beta1, cfg.beta2);
    const DecodeConfig dcfg{cfg.max_pred_len};

    // Same-class partner pool per episode, excluding the episode itself.
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < data.train.size(); ++i)
        by_class[data.train[i].class_id].push_back(i);

    std::mt19937_64 rng(cfg.seed);
    TrainResult result;
    result.best = params;
    result.best_val_map = -1.0;
    const auto t0 = std::chrono::steady_clock::now();
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        int steps = 0;
        for (std::size_t qi = 0; qi < data.train.size(); ++qi) {
            const EpisodeRecord& qep = data.train[qi];
            const std::vector<std::size_t>& pool = by_class[qep.class_id];
            if (pool.size() < 2) {
                if (epoch == 1)
                    std::cerr << "warning: class " << qep.class_id
                              << " has a single episode, skipping pair " << qep.pair_id << "\n";
                continue;
            }
            // uniform over same-class episodes, excluding the query's own
            std::vector<std::size_t> others;
            others.reserve(pool.size() - 1);
            for (std::size_t p : pool)
                if (p != qi) others.push_back(p);
            std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
            const EpisodeRecord& rep = data.train[others[pick(rng)]];

            Tape tape;
            const ForwardResult fwd = model_forward(tape, params, qep.query, rep.reference);
            const std::vector<StepLabel> labels = make_labels(rep.reference.cols(), rep.gt);
            const Var loss = weighted_loss_on_tape(tape, fwd.prob_vars, labels, cfg.c_w);
            loss_sum += tape.scalar(loss);
            ++steps;
            tape.backward(loss);
            ParamSet grads = fwd.bound.grads(tape);
            clip_global_norm(grads, cfg.clip);
            adam_step(params.p, grads, adam);
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.mean_train_loss = steps > 0 ? loss_sum / steps : 0.0;
        stats.val_map_avg = data.val.empty() ? 0.0 : run_model(params, data.val, dcfg).map_avg;
        stats.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(stats);
        if (stats.val_map_avg > result.best_val_map) {
            result.best_val_map = stats.val_map_avg;
            result.best_epoch = epoch;
            result.best = params;
        }
        if (on_epoch) on_epoch(stats);
    }
    if (data.val.empty()) result.best = params;  // no selection signal, keep the final weights
    return result;
}

}  // namespace vrl
