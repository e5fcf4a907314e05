// Command-line front end: synth / train / eval / predict / baseline / gradcheck.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "vrl/baselines.hpp"
#include "vrl/data.hpp"
#include "vrl/inference.hpp"
#include "vrl/metrics.hpp"
#include "vrl/model.hpp"
#include "vrl/training.hpp"

namespace fs = std::filesystem;
using namespace vrl;

namespace {

struct RunConfig {
    std::uint64_t seed = 0;
    int jobs = 1;
    // synthesis
    SynthConfig synth;
    // training
    TrainConfig train;
    bool log_timing = true;
    // gradient check
    double gradcheck_eps = 1e-3;
    double gradcheck_cw = 2.0;
    // decoding
    int max_pred_len = 32;
    // video baseline
    VideoBaselineConfig video;

    void set(const std::string& key, const std::string& value);
    void echo(std::ostream& os) const;
};

template <typename T>
T parse_num(const std::string& key, const std::string& value) {
    std::istringstream ss(value);
    T out;
    ss >> out;
    if (ss.fail() || !ss.eof()) throw ConfigError("bad value for " + key + ": '" + value + "'");
    return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto i = [&] { return parse_num<int>(key, value); };
    auto d = [&] { return parse_num<double>(key, value); };
    if (key == "seed") seed = parse_num<std::uint64_t>(key, value);
    else if (key == "jobs") jobs = i();
    else if (key == "n_classes") synth.n_classes = i();
    else if (key == "train_classes") synth.train_classes = i();
    else if (key == "val_classes") synth.val_classes = i();
    else if (key == "test_classes") synth.test_classes = i();
    else if (key == "segments_per_class") synth.segments_per_class = i();
    else if (key == "d") synth.d = i();
    else if (key == "seg_len_min") synth.seg_len_min = i();
    else if (key == "seg_len_max") synth.seg_len_max = i();
    else if (key == "query_len_min") synth.query_len_min = i();
    else if (key == "query_len_max") synth.query_len_max = i();
    else if (key == "bg_len_min") synth.bg_len_min = i();
    else if (key == "bg_len_max") synth.bg_len_max = i();
    else if (key == "noise_sigma") synth.noise_sigma = d();
    else if (key == "warp_min") synth.warp_min = d();
    else if (key == "warp_max") synth.warp_max = d();
    else if (key == "amp_min") synth.amp_min = d();
    else if (key == "amp_max") synth.amp_max = d();
    else if (key == "orthogonal_background") synth.orthogonal_background = i() != 0;
    else if (key == "lr") train.lr = d();
    else if (key == "beta1") train.beta1 = d();
    else if (key == "beta2") train.beta2 = d();
    else if (key == "l") train.l = i();
    else if (key == "k") train.k = i();
    else if (key == "c_w") train.c_w = d();
    else if (key == "epochs") train.epochs = i();
    else if (key == "clip") train.clip = d();
    else if (key == "max_pred_len") max_pred_len = i();
    else if (key == "log_timing") log_timing = i() != 0;
    else if (key == "gradcheck_eps") gradcheck_eps = d();
    else if (key == "gradcheck_cw") gradcheck_cw = d();
    else if (key == "video_hidden") video.hidden = i();
    else if (key == "video_epochs") video.epochs = i();
    else if (key == "video_lr") video.lr = d();
    else if (key == "margin") video.margin = d();
    else if (key == "stride") video.stride = i();
    else throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::echo(std::ostream& os) const {
    os << "seed=" << seed << "\njobs=" << jobs << "\nn_classes=" << synth.n_classes
       << "\ntrain_classes=" << synth.train_classes << "\nval_classes=" << synth.val_classes
       << "\ntest_classes=" << synth.test_classes
       << "\nsegments_per_class=" << synth.segments_per_class << "\nd=" << synth.d
       << "\nseg_len_min=" << synth.seg_len_min << "\nseg_len_max=" << synth.seg_len_max
       << "\nquery_len_min=" << synth.query_len_min << "\nquery_len_max=" << synth.query_len_max
       << "\nbg_len_min=" << synth.bg_len_min << "\nbg_len_max=" << synth.bg_len_max
       << "\nnoise_sigma=" << synth.noise_sigma << "\nwarp_min=" << synth.warp_min
       << "\nwarp_max=" << synth.warp_max << "\namp_min=" << synth.amp_min
       << "\namp_max=" << synth.amp_max
       << "\northogonal_background=" << (synth.orthogonal_background ? 1 : 0)
       << "\nlr=" << train.lr << "\nbeta1=" << train.beta1 << "\nbeta2=" << train.beta2
       << "\nl=" << train.l << "\nk=" << train.k << "\nc_w=" << train.c_w
       << "\nepochs=" << train.epochs << "\nclip=" << train.clip
       << "\nmax_pred_len=" << max_pred_len << "\nlog_timing=" << (log_timing ? 1 : 0)
       << "\ngradcheck_eps=" << gradcheck_eps << "\ngradcheck_cw=" << gradcheck_cw
       << "\nvideo_hidden=" << video.hidden << "\nvideo_epochs=" << video.epochs
       << "\nvideo_lr=" << video.lr << "\nmargin=" << video.margin
       << "\nstride=" << video.stride << "\n";
}

void load_config_file(RunConfig& cfg, const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path.string());
    std::string line;
    int row = 0;
    while (std::getline(is, line)) {
        ++row;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\r')) line.pop_back();
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(row) + ": expected key=value");
        cfg.set(line.substr(0, eq), line.substr(eq + 1));
    }
}

void write_effective_config(const RunConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream os(out_dir / "effective_config.txt");
    if (!os) throw IoError("cannot write effective config under " + out_dir.string());
    cfg.echo(os);
}

// Evaluation fan-out across episodes (pure per-episode work).
template <typename Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> threads;
    std::atomic<int> next{0};
    for (int t = 0; t < jobs; ++t)
        threads.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (std::thread& th : threads) th.join();
}

struct MethodRun {
    std::vector<Segment> preds;
    std::vector<double> log_scores;  // 0 for methods without a probability score
};

MethodRun run_method(const std::string& method, const RunConfig& cfg, const DatasetSplits& data,
                     const std::vector<EpisodeRecord>& episodes, const fs::path& ckpt) {
    const DecodeConfig dcfg{cfg.max_pred_len};
    const int n = static_cast<int>(episodes.size());
    MethodRun run;
    run.preds.resize(static_cast<std::size_t>(n));
    run.log_scores.assign(static_cast<std::size_t>(n), 0.0);
    if (method == "model") {
        if (ckpt.empty()) throw ConfigError("method 'model' requires --ckpt");
        const ModelParams params = load_checkpoint(ckpt);
        parallel_for(n, cfg.jobs, [&](int i) {
            Tape tape;
            const ForwardResult fwd =
                model_forward(tape, params, episodes[static_cast<std::size_t>(i)].query,
                              episodes[static_cast<std::size_t>(i)].reference);
            const Decoded dec = decode(fwd.probs, dcfg);
            run.preds[static_cast<std::size_t>(i)] = dec.seg;
            run.log_scores[static_cast<std::size_t>(i)] = dec.log_score;
        });
    } else if (method == "chance") {
        std::mt19937_64 rng(cfg.seed);  // sequential draw keeps runs reproducible
        for (int i = 0; i < n; ++i)
            run.preds[static_cast<std::size_t>(i)] =
                chance_baseline(episodes[static_cast<std::size_t>(i)].reference.cols(), dcfg, rng);
    } else if (method == "frame") {
        parallel_for(n, cfg.jobs, [&](int i) {
            run.preds[static_cast<std::size_t>(i)] =
                frame_level_baseline(episodes[static_cast<std::size_t>(i)].query,
                                     episodes[static_cast<std::size_t>(i)].reference, dcfg);
        });
    } else if (method == "video") {
        VideoBaselineConfig vcfg = cfg.video;
        vcfg.seed = cfg.seed;
        const EncoderParams enc = video_level_train(data, vcfg, dcfg);
        parallel_for(n, cfg.jobs, [&](int i) {
            const auto [seg, dist] =
                video_level_search(enc, episodes[static_cast<std::size_t>(i)].query,
                                   episodes[static_cast<std::size_t>(i)].reference, dcfg,
                                   vcfg.stride);
            run.preds[static_cast<std::size_t>(i)] = seg;
            run.log_scores[static_cast<std::size_t>(i)] = -dist;
        });
    } else {
        throw ConfigError("unknown method '" + method + "'");
    }
    return run;
}

int cmd_synth(const RunConfig& cfg, const fs::path& out_dir) {
    SynthConfig scfg = cfg.synth;
    scfg.seed = cfg.seed;
    const DatasetSplits splits = synthesize(scfg);
    write_dataset(splits, out_dir);
    write_effective_config(cfg, out_dir);
    std::cout << "train\t" << splits.train.size() << "\nval\t" << splits.val.size() << "\ntest\t"
              << splits.test.size() << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir) {
    const DatasetSplits data = load_manifest(data_dir / "manifest.tsv");
    write_effective_config(cfg, out_dir);
    TrainConfig tcfg = cfg.train;
    tcfg.seed = cfg.seed;
    tcfg.max_pred_len = cfg.max_pred_len;
    std::ofstream log(out_dir / "metrics.tsv");
    if (!log) throw IoError("cannot write metrics log under " + out_dir.string());
    log << "epoch\tmean_train_loss\tval_mAP_avg\twall_seconds\n";
    const TrainResult result = train(tcfg, data, [&](const EpochStats& st) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%d\t%.9g\t%.9g\t%.3f\n", st.epoch, st.mean_train_loss,
                      st.val_map_avg, cfg.log_timing ? st.wall_seconds : 0.0);
        log << buf;
        log.flush();
        std::cout << "epoch " << st.epoch << " loss " << st.mean_train_loss << " val_mAP "
                  << 100.0 * st.val_map_avg << "\n";
    });
    save_checkpoint(result.best, out_dir / "checkpoint.vrlc");
    std::cout << "best epoch " << result.best_epoch << " val_mAP " << 100.0 * result.best_val_map
              << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const fs::path& data_dir, const fs::path& ckpt,
             const fs::path& out_dir, const std::string& method) {
    const DatasetSplits data = load_manifest(data_dir / "manifest.tsv");
    write_effective_config(cfg, out_dir);
    const MethodRun run = run_method(method, cfg, data, data.test, ckpt);
    std::vector<Segment> gts;
    for (const EpisodeRecord& ep : data.test) gts.push_back(ep.gt);
    const EvalResult res = evaluate(run.preds, gts);
    const std::string header = "method\t0.5\t0.6\t0.7\t0.8\t0.9\tAverage";
    const std::string row = format_eval(res, method);
    std::cout << header << "\n" << row << "\n";
    std::ofstream os(out_dir / "eval.tsv");
    os << header << "\n" << row << "\n";

    // Supplementary per-class breakdown.
    std::map<int, std::pair<std::vector<Segment>, std::vector<Segment>>> per_class;
    for (std::size_t i = 0; i < data.test.size(); ++i) {
        per_class[data.test[i].class_id].first.push_back(run.preds[i]);
        per_class[data.test[i].class_id].second.push_back(data.test[i].gt);
    }
    std::ofstream pc(out_dir / "eval_by_class.tsv");
    pc << "class_id\t0.5\t0.6\t0.7\t0.8\t0.9\tAverage\n";
    for (const auto& [cls, pg] : per_class)
        pc << format_eval(evaluate(pg.first, pg.second), std::to_string(cls)) << "\n";
    return 0;
}

int cmd_predict(const RunConfig& cfg, const fs::path& data_dir, const fs::path& ckpt,
                const fs::path& out_dir, bool want_attention) {
    const DatasetSplits data = load_manifest(data_dir / "manifest.tsv");
    write_effective_config(cfg, out_dir);
    if (ckpt.empty()) throw ConfigError("predict requires --ckpt");
    const ModelParams params = load_checkpoint(ckpt);
    const DecodeConfig dcfg{cfg.max_pred_len};
    std::ofstream os(out_dir / "predictions.tsv");
    os << "pair_id\tpred_s\tpred_e\tlog_score\n";
    if (want_attention) fs::create_directories(out_dir / "attention");
    const int n = static_cast<int>(data.test.size());
    std::vector<Decoded> decs(static_cast<std::size_t>(n));
    std::vector<Tensor> atts(static_cast<std::size_t>(n));
    parallel_for(n, cfg.jobs, [&](int i) {
        Tape tape;
        const ForwardResult fwd = model_forward(tape, params, data.test[static_cast<std::size_t>(i)].query,
                                                data.test[static_cast<std::size_t>(i)].reference);
        decs[static_cast<std::size_t>(i)] = decode(fwd.probs, dcfg);
        if (want_attention) atts[static_cast<std::size_t>(i)] = export_attention(fwd.trace);
    });
    for (int i = 0; i < n; ++i) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%s\t%d\t%d\t%.12g\n",
                      data.test[static_cast<std::size_t>(i)].pair_id.c_str(),
                      decs[static_cast<std::size_t>(i)].seg.s, decs[static_cast<std::size_t>(i)].seg.e,
                      decs[static_cast<std::size_t>(i)].log_score);
        os << buf;
        if (want_attention) {
            const Tensor& a = atts[static_cast<std::size_t>(i)];
            std::ofstream af(out_dir / "attention" /
                             (data.test[static_cast<std::size_t>(i)].pair_id + ".tsv"));
            for (int row = 0; row < a.rows(); ++row) {
                for (int col = 0; col < a.cols(); ++col)
                    af << (col ? "\t" : "") << a.at(row, col);
                af << "\n";
            }
        }
    }
    return 0;
}

int cmd_baseline(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir,
                 const std::string& method) {
    if (method == "model") throw ConfigError("baseline methods are chance, frame, video");
    const DatasetSplits data = load_manifest(data_dir / "manifest.tsv");
    write_effective_config(cfg, out_dir);
    const MethodRun run = run_method(method, cfg, data, data.test, {});
    std::ofstream os(out_dir / ("predictions_" + method + ".tsv"));
    os << "pair_id\tpred_s\tpred_e\tlog_score\tmethod\n";
    for (std::size_t i = 0; i < data.test.size(); ++i) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s\t%d\t%d\t%.12g\t%s\n", data.test[i].pair_id.c_str(),
                      run.preds[i].s, run.preds[i].e, run.log_scores[i], method.c_str());
        os << buf;
    }
    return 0;
}

int cmd_gradcheck(const RunConfig& cfg, const fs::path& out_dir) {
    // Small episode; double precision throughout. The loss weight defaults to
    // 2 here (not the training default 10): finite differences quantize the
    // loss to ulp(|loss|), and a large c_w inflates |loss| until that
    // quantization alone exceeds the 1e-4 tolerance on near-zero gradient
    // entries. The gradient code paths are identical for every c_w >= 1.
    const ModelConfig mcfg{5, 8, 2};
    const ModelParams params = ModelParams::init(mcfg, cfg.seed);
    std::mt19937_64 rng(cfg.seed + 17);
    std::normal_distribution<double> noise(0.0, 1.0);
    Tensor query = Tensor::zeros({5, 5}), ref = Tensor::zeros({5, 7});
    for (double& v : query.data) v = noise(rng);
    for (double& v : ref.data) v = noise(rng);
    const std::vector<StepLabel> labels = make_labels(7, Segment{3, 5});

    Tape tape;
    const ForwardResult fwd = model_forward(tape, params, query, ref);
    const Var loss = weighted_loss_on_tape(tape, fwd.prob_vars, labels, cfg.gradcheck_cw);
    tape.backward(loss);
    const ParamSet analytic = fwd.bound.grads(tape);

    const auto f = [&](const ParamSet& ps) {
        ModelParams mp;
        mp.cfg = mcfg;
        mp.p = ps;
        Tape t;
        const ForwardResult r2 = model_forward(t, mp, query, ref);
        return weighted_loss(r2.probs, labels, cfg.gradcheck_cw);
    };
    const GradCheckReport report = grad_check(params.p, f, analytic, cfg.gradcheck_eps, 1e-4);
    if (!out_dir.empty()) write_effective_config(cfg, out_dir);
    std::cout << "block\tmax_rel_err\n";
    for (const GradCheckBlock& b : report.blocks)
        std::cout << b.name << "\t" << b.max_rel_err << "\n";
    std::cout << (report.passed ? "PASS" : "FAIL") << "\tmax_rel_err=" << report.max_rel_err
              << "\ttol=" << report.tol << "\n";
    return report.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross gated bilinear matching for video re-localization"};
    app.require_subcommand(1);

    std::string config_path, data_dir, ckpt, out_dir = "out", method = "model";
    std::uint64_t seed = 0;
    bool seed_given = false;
    int jobs = 0;
    bool export_att = false;
    std::vector<std::string> overrides;

    app.add_option("--config", config_path, "key=value config file");
    auto* seed_opt = app.add_option("--seed", seed, "random seed");
    app.add_option("--data", data_dir, "dataset directory (contains manifest.tsv)");
    app.add_option("--ckpt", ckpt, "model checkpoint path");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--method", method, "model | chance | frame | video");
    auto* jobs_opt = app.add_option("--jobs", jobs, "evaluation fan-out");
    app.add_option("--set", overrides, "extra key=value overrides")->take_all();
    app.add_flag("--export-attention", export_att, "write per-pair attention matrices");

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    auto* train_cmd = app.add_subcommand("train", "train the matching model");
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a method on the test split");
    auto* predict = app.add_subcommand("predict", "write model predictions");
    auto* baseline = app.add_subcommand("baseline", "run a baseline method");
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg;
        if (!config_path.empty()) load_config_file(cfg, config_path);
        for (const std::string& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (seed_opt->count() > 0) cfg.seed = seed;
        if (jobs_opt->count() > 0) cfg.jobs = jobs;
        (void)seed_given;

        if (synth->parsed()) return cmd_synth(cfg, out_dir);
        if (train_cmd->parsed()) return cmd_train(cfg, data_dir, out_dir);
        if (eval_cmd->parsed()) return cmd_eval(cfg, data_dir, ckpt, out_dir, method);
        if (predict->parsed()) return cmd_predict(cfg, data_dir, ckpt, out_dir, export_att);
        if (baseline->parsed()) return cmd_baseline(cfg, data_dir, out_dir, method);
        if (gradcheck->parsed()) return cmd_gradcheck(cfg, out_dir);
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
