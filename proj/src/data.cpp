#include "vrl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace vrl {

void DatasetSplits::validate() const {
    std::set<int> train_cls, val_cls, test_cls;
    for (const EpisodeRecord& ep : train) train_cls.insert(ep.class_id);
    for (const EpisodeRecord& ep : val) val_cls.insert(ep.class_id);
    for (const EpisodeRecord& ep : test) test_cls.insert(ep.class_id);
    for (int c : val_cls)
        if (train_cls.count(c))
            throw ManifestError("class " + std::to_string(c) + " appears in both train and val");
    for (int c : test_cls)
        if (train_cls.count(c) || val_cls.count(c))
            throw ManifestError("class " + std::to_string(c) + " appears in test and another split");
    auto check_eps = [](const std::vector<EpisodeRecord>& eps, const char* split) {
        for (const EpisodeRecord& ep : eps) {
            if (ep.query.cols() < 1)
                throw ManifestError("empty query in " + std::string(split) + " pair " + ep.pair_id);
            if (ep.gt.s < 1 || ep.gt.s > ep.gt.e || ep.gt.e > ep.reference.cols())
                throw ManifestError("ground truth out of range in " + std::string(split) +
                                    " pair " + ep.pair_id);
        }
    };
    check_eps(train, "train");
    check_eps(val, "val");
    check_eps(test, "test");
}

void SynthConfig::validate() const {
    if (train_classes + val_classes + test_classes != n_classes)
        throw ConfigError("split proportions must sum to n_classes");
    if (d < 1 || segments_per_class < 1) throw ConfigError("d and segments_per_class must be >= 1");
    if (orthogonal_background && d < 2) throw ConfigError("orthogonal background needs d >= 2");
    if (seg_len_min < 2 || seg_len_min > seg_len_max) throw ConfigError("bad segment length range");
    if (query_len_min < 1 || query_len_min > query_len_max) throw ConfigError("bad query length range");
    if (bg_len_min < 0 || bg_len_min > bg_len_max) throw ConfigError("bad background length range");
    if (noise_sigma < 0) throw ConfigError("noise sigma must be non-negative");
    if (warp_min <= 0 || warp_min > warp_max) throw ConfigError("bad warp range");
    if (amp_min <= 0 || amp_min > amp_max) throw ConfigError("bad amplitude range");
}

namespace {

double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

// Smooth per-class track: random walk, moving-average smoothing, columns
// scaled to unit norm over the active coordinate range.
Tensor make_prototype(int d, int len, int coord_lo, int coord_hi, std::mt19937_64& rng) {
    std::normal_distribution<double> step(0.0, 1.0);
    Tensor walk = Tensor::zeros({d, len});
    for (int i = coord_lo; i < coord_hi; ++i) {
        double x = step(rng);
        for (int t = 0; t < len; ++t) {
            x += 0.5 * step(rng);
            walk.at(i, t) = x;
        }
    }
    Tensor proto = Tensor::zeros({d, len});
    for (int t = 0; t < len; ++t) {
        for (int i = coord_lo; i < coord_hi; ++i) {
            double acc = 0.0;
            int n = 0;
            for (int u = std::max(0, t - 1); u <= std::min(len - 1, t + 1); ++u, ++n)
                acc += walk.at(i, u);
            proto.at(i, t) = acc / n;
        }
        double nrm = 0.0;
        for (int i = 0; i < d; ++i) nrm += proto.at(i, t) * proto.at(i, t);
        nrm = std::sqrt(nrm);
        if (nrm > 0)
            for (int i = 0; i < d; ++i) proto.at(i, t) /= nrm;
    }
    return proto;
}

// Nearest-neighbor temporal resampling to new_len columns.
Tensor resample(const Tensor& src, int new_len) {
    Tensor out = Tensor::zeros({src.rows(), new_len});
    for (int t = 0; t < new_len; ++t) {
        int s = static_cast<int>(std::floor((t + 0.5) * src.cols() / new_len));
        s = std::clamp(s, 0, src.cols() - 1);
        for (int i = 0; i < src.rows(); ++i) out.at(i, t) = src.at(i, s);
    }
    return out;
}

Tensor make_instance(const Tensor& proto, const SynthConfig& cfg, int min_len, int max_len,
                     std::mt19937_64& rng) {
    std::uniform_real_distribution<double> warp(cfg.warp_min, cfg.warp_max);
    std::uniform_real_distribution<double> amp(cfg.amp_min, cfg.amp_max);
    std::normal_distribution<double> noise(0.0, 1.0);
    int len = static_cast<int>(std::lround(proto.cols() * warp(rng)));
    len = std::clamp(len, min_len, max_len);
    Tensor inst = resample(proto, len);
    const double a = amp(rng);
    for (double& v : inst.data) v = f32(a * v + cfg.noise_sigma * noise(rng));
    return inst;
}

Tensor make_background(int d, int len, int coord_lo, int coord_hi, std::mt19937_64& rng) {
    const int active = coord_hi - coord_lo;
    std::normal_distribution<double> noise(0.0, 1.0 / std::sqrt(static_cast<double>(active)));
    Tensor bg = Tensor::zeros({d, len});
    for (int t = 0; t < len; ++t)
        for (int i = coord_lo; i < coord_hi; ++i) bg.at(i, t) = f32(noise(rng));
    return bg;
}

}  // namespace

DatasetSplits synthesize(const SynthConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    const int proto_lo = 0;
    const int proto_hi = cfg.orthogonal_background ? cfg.d / 2 : cfg.d;
    const int bg_lo = cfg.orthogonal_background ? cfg.d / 2 : 0;
    const int bg_hi = cfg.d;

    DatasetSplits splits;
    std::uniform_int_distribution<int> seg_len(cfg.seg_len_min, cfg.seg_len_max);
    std::uniform_int_distribution<int> bg_total(cfg.bg_len_min, cfg.bg_len_max);
    for (int c = 0; c < cfg.n_classes; ++c) {
        const Tensor proto = make_prototype(cfg.d, seg_len(rng), proto_lo, proto_hi, rng);
        for (int s = 0; s < cfg.segments_per_class; ++s) {
            EpisodeRecord ep;
            ep.pair_id = "c" + std::to_string(c) + "_" + std::to_string(s);
            ep.class_id = c;
            const Tensor inst = make_instance(proto, cfg, 2, 4 * proto.cols(), rng);
            const int bg = bg_total(rng);
            std::uniform_int_distribution<int> left_dist(0, bg);
            const int left = left_dist(rng);
            const int right = bg - left;
            const int r = left + inst.cols() + right;
            ep.reference = Tensor::zeros({cfg.d, r});
            const Tensor bg_track = make_background(cfg.d, bg, bg_lo, bg_hi, rng);
            for (int t = 0; t < left; ++t)
                for (int i = 0; i < cfg.d; ++i) ep.reference.at(i, t) = bg_track.at(i, t);
            for (int t = 0; t < inst.cols(); ++t)
                for (int i = 0; i < cfg.d; ++i) ep.reference.at(i, left + t) = inst.at(i, t);
            for (int t = 0; t < right; ++t)
                for (int i = 0; i < cfg.d; ++i)
                    ep.reference.at(i, left + inst.cols() + t) = bg_track.at(i, left + t);
            ep.gt = Segment{left + 1, left + inst.cols()};
            ep.query = make_instance(proto, cfg, cfg.query_len_min, cfg.query_len_max, rng);
            if (c < cfg.train_classes)
                splits.train.push_back(std::move(ep));
            else if (c < cfg.train_classes + cfg.val_classes)
                splits.val.push_back(std::move(ep));
            else
                splits.test.push_back(std::move(ep));
        }
    }
    splits.validate();
    return splits;
}

namespace {

constexpr char kFeatureMagic[5] = {'V', 'R', 'L', 'F', '1'};

void write_u32le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32le(std::istream& is, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw TruncatedFileError(std::string("feature file ended inside ") + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_features(const Tensor& seq, const std::filesystem::path& path) {
    if (seq.rank() != 2 || seq.rows() < 1 || seq.cols() < 1)
        throw ContractError("write_features: need a non-empty {d, T} matrix");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open feature file for writing: " + path.string());
    os.write(kFeatureMagic, sizeof(kFeatureMagic));
    write_u32le(os, static_cast<std::uint32_t>(seq.rows()));
    write_u32le(os, static_cast<std::uint32_t>(seq.cols()));
    static_assert(sizeof(float) == 4);
    for (int t = 0; t < seq.cols(); ++t)
        for (int i = 0; i < seq.rows(); ++i) {
            const float v = static_cast<float>(seq.at(i, t));
            os.write(reinterpret_cast<const char*>(&v), sizeof(float));
        }
    if (!os) throw IoError("failed writing feature file: " + path.string());
}

Tensor read_features(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open feature file: " + path.string());
    char magic[5];
    if (!is.read(magic, 5)) throw TruncatedFileError("feature file shorter than magic");
    if (std::memcmp(magic, kFeatureMagic, 5) != 0)
        throw BadMagicError("not a VRLF1 feature file: " + path.string());
    const int d = static_cast<int>(read_u32le(is, "header"));
    const int T = static_cast<int>(read_u32le(is, "header"));
    if (d < 1 || T < 1) throw ManifestError("feature file with non-positive dims: " + path.string());
    Tensor seq = Tensor::zeros({d, T});
    for (int t = 0; t < T; ++t)
        for (int i = 0; i < d; ++i) {
            float v;
            if (!is.read(reinterpret_cast<char*>(&v), sizeof(float)))
                throw TruncatedFileError("feature payload in " + path.string());
            seq.at(i, t) = static_cast<double>(v);
        }
    return seq;
}

namespace {

void append_manifest_rows(std::ostream& os, const std::vector<EpisodeRecord>& eps,
                          const char* split) {
    for (const EpisodeRecord& ep : eps)
        os << ep.pair_id << '\t' << split << '\t' << ep.class_id << '\t' << "features/" << ep.pair_id
           << "_q.vrlf" << '\t' << "features/" << ep.pair_id << "_r.vrlf" << '\t' << ep.gt.s << '\t'
           << ep.gt.e << '\n';
}

void write_split_features(const std::vector<EpisodeRecord>& eps,
                          const std::filesystem::path& feat_dir) {
    for (const EpisodeRecord& ep : eps) {
        write_features(ep.query, feat_dir / (ep.pair_id + "_q.vrlf"));
        write_features(ep.reference, feat_dir / (ep.pair_id + "_r.vrlf"));
    }
}

}  // namespace

void write_dataset(const DatasetSplits& splits, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "features");
    write_split_features(splits.train, dir / "features");
    write_split_features(splits.val, dir / "features");
    write_split_features(splits.test, dir / "features");
    std::ofstream os(dir / "manifest.tsv");
    if (!os) throw IoError("cannot write manifest under " + dir.string());
    os << "pair_id\tsplit\tclass_id\tquery_path\tref_path\tgt_start\tgt_end\n";
    append_manifest_rows(os, splits.train, "train");
    append_manifest_rows(os, splits.val, "val");
    append_manifest_rows(os, splits.test, "test");
    if (!os) throw IoError("failed writing manifest under " + dir.string());
}

DatasetSplits load_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream is(manifest_path);
    if (!is) throw IoError("cannot open manifest: " + manifest_path.string());
    const std::filesystem::path base = manifest_path.parent_path();
    std::string line;
    if (!std::getline(is, line)) throw ManifestError("manifest is empty");
    if (line != "pair_id\tsplit\tclass_id\tquery_path\tref_path\tgt_start\tgt_end")
        throw ManifestError("unexpected manifest header: " + line);
    DatasetSplits splits;
    int row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string pair_id, split, class_id, qpath, rpath, gs, ge;
        if (!std::getline(ss, pair_id, '\t') || !std::getline(ss, split, '\t') ||
            !std::getline(ss, class_id, '\t') || !std::getline(ss, qpath, '\t') ||
            !std::getline(ss, rpath, '\t') || !std::getline(ss, gs, '\t') ||
            !std::getline(ss, ge, '\t'))
            throw ManifestError("row " + std::to_string(row) + ": expected 7 tab-separated fields");
        EpisodeRecord ep;
        ep.pair_id = pair_id;
        try {
            ep.class_id = std::stoi(class_id);
            ep.gt.s = std::stoi(gs);
            ep.gt.e = std::stoi(ge);
        } catch (const std::exception&) {
            throw ManifestError("row " + std::to_string(row) + ": non-numeric field");
        }
        ep.query = read_features(base / qpath);
        ep.reference = read_features(base / rpath);
        if (ep.gt.s < 1 || ep.gt.s > ep.gt.e || ep.gt.e > ep.reference.cols())
            throw ManifestError("row " + std::to_string(row) + ": ground truth [" + gs + "," + ge +
                                "] out of range for reference of length " +
                                std::to_string(ep.reference.cols()));
        if (split == "train")
            splits.train.push_back(std::move(ep));
        else if (split == "val")
            splits.val.push_back(std::move(ep));
        else if (split == "test")
            splits.test.push_back(std::move(ep));
        else
            throw ManifestError("row " + std::to_string(row) + ": unknown split '" + split + "'");
    }
    splits.validate();
    return splits;
}

}  // namespace vrl
