#include "vrl/model.hpp"

#include <cstring>
#include <fstream>

namespace vrl {

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
    if (cfg.d < 1 || cfg.l < 1 || cfg.k < 1) throw ConfigError("model dims must be positive");
    std::mt19937_64 rng(seed);
    ModelParams mp;
    mp.cfg = cfg;
    add_lstm_params(mp.p, "agg", cfg.d, cfg.l, rng);  // shared by query and reference
    add_attention_params(mp.p, "att", cfg.l, rng);
    add_cross_gate_params(mp.p, "gate", cfg.l, rng);
    add_bilinear_params(mp.p, "bilin", cfg.l, cfg.k, rng);
    add_lstm_params(mp.p, "mfwd", cfg.l, cfg.l, rng);
    add_lstm_params(mp.p, "mbwd", cfg.l, cfg.l, rng);
    add_lstm_params(mp.p, "loc", 2 * cfg.l, cfg.l, rng);
    mp.p.add("cls.w", init_uniform({4, cfg.l}, cfg.l, rng));
    mp.p.add("cls.b", Tensor::zeros({4}));
    return mp;
}

namespace {

Tensor stack_columns(const Tape& tape, const std::vector<Var>& cols) {
    const int rows = tape.val(cols[0]).rows();
    Tensor out = Tensor::zeros({rows, static_cast<int>(cols.size())});
    for (std::size_t t = 0; t < cols.size(); ++t)
        for (int i = 0; i < rows; ++i) out.at(i, static_cast<int>(t)) = tape.val(cols[t]).at(i);
    return out;
}

}  // namespace

ForwardResult model_forward(Tape& tape, const ModelParams& params, const Tensor& query,
                            const Tensor& ref) {
    if (query.rank() != 2 || query.cols() < 1) throw ContractError("forward: empty query");
    if (ref.rank() != 2 || ref.cols() < 1) throw ContractError("forward: empty reference");
    if (query.rows() != params.cfg.d || ref.rows() != params.cfg.d)
        throw DimensionError("forward: feature dim " + std::to_string(query.rows()) + "/" +
                             std::to_string(ref.rows()) + ", model expects " +
                             std::to_string(params.cfg.d));
    const int l = params.cfg.l;
    const int q = query.cols();
    const int r = ref.cols();

    ForwardResult res;
    res.bound = BoundParams::bind(tape, params.p);
    const BoundParams& bp = res.bound;
    const LstmVars agg = bind_lstm(bp, "agg", params.cfg.d, l);
    const AttentionVars att = bind_attention(bp, "att");
    const CrossGateVars gate = bind_cross_gate(bp, "gate");
    const BilinearVars bilin = bind_bilinear(bp, "bilin", l, params.cfg.k);
    const LstmVars mfwd = bind_lstm(bp, "mfwd", l, l);
    const LstmVars mbwd = bind_lstm(bp, "mbwd", l, l);
    const LstmVars loc = bind_lstm(bp, "loc", 2 * l, l);
    const Var cls_w = bp["cls.w"];
    const Var cls_b = bp["cls.b"];

    // Aggregation (one parameter set for both sequences).
    const std::vector<LstmState> hq_states = aggregate(tape, agg, query);
    const std::vector<LstmState> hr_states = aggregate(tape, agg, ref);
    std::vector<Var> hq_cols, hq_proj;
    hq_cols.reserve(static_cast<std::size_t>(q));
    hq_proj.reserve(static_cast<std::size_t>(q));
    for (const LstmState& st : hq_states) {
        hq_cols.push_back(st.h);
        hq_proj.push_back(tape.matmul(att.wq, st.h));
    }

    // Matching, left to right. Attention at step i needs the forward matching
    // state from step i-1, so t and the forward LSTM are interleaved; the
    // backward LSTM then runs over the finished t sequence in reverse.
    std::vector<Var> t_seq, hf_cols, alpha_rows;
    std::vector<Var> gated_q_cols, gated_r_cols;
    LstmState fwd_state = lstm_zero_state(tape, l);
    for (int i = 0; i < r; ++i) {
        const AttendResult a =
            attend(tape, att, hq_cols, hq_proj, hr_states[static_cast<std::size_t>(i)].h,
                   fwd_state.h);
        alpha_rows.push_back(a.weights);
        const auto [gq, gr] =
            cross_gate(tape, gate, a.weighted_query, hr_states[static_cast<std::size_t>(i)].h);
        gated_q_cols.push_back(gq);
        gated_r_cols.push_back(gr);
        const Var ti = bilinear_match(tape, bilin, gq, gr);
        t_seq.push_back(ti);
        fwd_state = lstm_step(tape, mfwd, ti, fwd_state);
        hf_cols.push_back(fwd_state.h);
    }
    std::vector<Var> hb_cols(static_cast<std::size_t>(r));
    LstmState bwd_state = lstm_zero_state(tape, l);
    for (int i = r - 1; i >= 0; --i) {
        bwd_state = lstm_step(tape, mbwd, t_seq[static_cast<std::size_t>(i)], bwd_state);
        hb_cols[static_cast<std::size_t>(i)] = bwd_state.h;
    }

    // Localization over h^m_i = [h^f_i; h^b_i].
    std::vector<Var> hl_cols;
    LstmState loc_state = lstm_zero_state(tape, l);
    for (int i = 0; i < r; ++i) {
        const std::array<Var, 2> parts{hf_cols[static_cast<std::size_t>(i)],
                                       hb_cols[static_cast<std::size_t>(i)]};
        loc_state = lstm_step(tape, loc, tape.concat(parts), loc_state);
        hl_cols.push_back(loc_state.h);
        const Var p = tape.softmax(tape.add(tape.matmul(cls_w, loc_state.h), cls_b));
        res.prob_vars.push_back(p);
        const Tensor& pv = tape.val(p);
        res.probs.push_back(StepProbs{pv.at(0), pv.at(1), pv.at(2), pv.at(3)});
    }

    ForwardTrace& tr = res.trace;
    tr.hq = stack_columns(tape, hq_cols);
    std::vector<Var> hr_cols;
    for (const LstmState& st : hr_states) hr_cols.push_back(st.h);
    tr.hr = stack_columns(tape, hr_cols);
    tr.alpha = Tensor::zeros({r, q});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < q; ++j)
            tr.alpha.at(i, j) = tape.val(alpha_rows[static_cast<std::size_t>(i)]).at(j);
    tr.gated_q = stack_columns(tape, gated_q_cols);
    tr.gated_r = stack_columns(tape, gated_r_cols);
    tr.match = stack_columns(tape, t_seq);
    tr.hf = stack_columns(tape, hf_cols);
    tr.hb = stack_columns(tape, hb_cols);
    tr.hl = stack_columns(tape, hl_cols);
    tr.probs = res.probs;
    return res;
}

namespace {

constexpr char kCheckpointMagic[5] = {'V', 'R', 'L', 'C', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw TruncatedFileError(std::string("checkpoint ended inside ") + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_u32(os, static_cast<std::uint32_t>(params.cfg.d));
    write_u32(os, static_cast<std::uint32_t>(params.cfg.l));
    write_u32(os, static_cast<std::uint32_t>(params.cfg.k));
    write_u32(os, static_cast<std::uint32_t>(params.p.block_count()));
    for (std::size_t b = 0; b < params.p.block_count(); ++b) {
        const std::string& name = params.p.names[b];
        const Tensor& t = params.p.values[b];
        write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<std::uint32_t>(t.shape.size()));
        for (int s : t.shape) write_u32(os, static_cast<std::uint32_t>(s));
        static_assert(sizeof(double) == 8);
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    }
    if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path.string());
    char magic[5];
    if (!is.read(magic, 5)) throw TruncatedFileError("checkpoint shorter than magic");
    if (std::memcmp(magic, kCheckpointMagic, 5) != 0)
        throw BadMagicError("not a VRLC1 checkpoint: " + path.string());
    ModelParams mp;
    mp.cfg.d = static_cast<int>(read_u32(is, "header"));
    mp.cfg.l = static_cast<int>(read_u32(is, "header"));
    mp.cfg.k = static_cast<int>(read_u32(is, "header"));
    const std::uint32_t nblocks = read_u32(is, "header");
    for (std::uint32_t b = 0; b < nblocks; ++b) {
        const std::uint32_t namelen = read_u32(is, "block name length");
        std::string name(namelen, '\0');
        if (!is.read(name.data(), namelen)) throw TruncatedFileError("checkpoint block name");
        const std::uint32_t ndim = read_u32(is, "block rank");
        std::vector<int> shape;
        for (std::uint32_t i = 0; i < ndim; ++i)
            shape.push_back(static_cast<int>(read_u32(is, "block shape")));
        Tensor t = Tensor::zeros(shape);
        if (!is.read(reinterpret_cast<char*>(t.data.data()),
                     static_cast<std::streamsize>(t.data.size() * sizeof(double))))
            throw TruncatedFileError("checkpoint block payload for '" + name + "'");
        mp.p.add(name, std::move(t));
    }
    return mp;
}

}  // namespace vrl
