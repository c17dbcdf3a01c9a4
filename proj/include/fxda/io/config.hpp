#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fxda/core/error.hpp"
#include "fxda/data/glyphs.hpp"
#include "fxda/data/idx.hpp"
#include "fxda/data/task.hpp"
#include "fxda/data/usps.hpp"
#include "fxda/io/metrics.hpp"
#include "fxda/nn/models.hpp"
#include "fxda/train/trainer.hpp"

namespace fxda {

/// Where a domain's images come from. Toy glyphs are generated on the fly;
/// idx and usps read local files (paths may be relative to a data root).
struct DatasetSpec {
    enum class Kind { toy_glyphs, idx, usps };
    Kind kind = Kind::toy_glyphs;
    GlyphStyle style = GlyphStyle::A;
    int64_t per_class = 64;
    uint64_t seed = 1;
    std::string images;  // idx
    std::string labels;  // idx, optional
    std::string path;    // usps
};

struct EvalConfig {
    std::string split = "test";  // fall back to train sets when no test spec given
    int64_t semantic_samples = 256;

    void validate() const {
        if (split != "test" && split != "train")
            throw ConfigError("eval.split must be \"test\" or \"train\"");
        if (semantic_samples < 1) throw ConfigError("eval.semantic_samples must be >= 1");
    }
};

/// Everything one run needs, parsed from a single JSON file. Unknown keys are
/// rejected at every level so a typo never silently falls back to a default.
struct RunConfig {
    uint64_t seed = 7;
    std::string out_dir = "run";
    ArchConfig arch{ArchFamily::toy, 10};
    DatasetSpec source, target;
    std::optional<DatasetSpec> source_test, target_test;
    Protocol protocol = Protocol::full();
    int64_t image_size = 16;
    TrainConfig train;
    EvalConfig eval;

    void validate() const {
        validate_arch(arch);
        if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
        if (image_size < 1) throw ConfigError("data.image_size must be positive");
        train.validate();
        eval.validate();
    }
};

namespace detail {

using json = nlohmann::json;

inline void reject_unknown(const json& o, const std::string& where,
                           std::initializer_list<const char*> allowed) {
    for (auto it = o.begin(); it != o.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
    }
}

inline const json& need(const json& o, const char* key, const std::string& where) {
    auto it = o.find(key);
    if (it == o.end()) throw ConfigError(where + " is missing required key \"" + key + "\"");
    return *it;
}

inline std::string get_string(const json& o, const std::string& where) {
    if (!o.is_string()) throw ConfigError(where + " must be a string");
    return o.get<std::string>();
}

inline bool get_bool(const json& o, const std::string& where) {
    if (!o.is_boolean()) throw ConfigError(where + " must be a boolean");
    return o.get<bool>();
}

inline int64_t get_int(const json& o, const std::string& where) {
    if (!o.is_number_integer()) throw ConfigError(where + " must be an integer");
    return o.get<int64_t>();
}

inline uint64_t get_u64(const json& o, const std::string& where) {
    if (o.is_number_unsigned()) return o.get<uint64_t>();
    if (o.is_number_integer() && o.get<int64_t>() >= 0)
        return static_cast<uint64_t>(o.get<int64_t>());
    throw ConfigError(where + " must be a non-negative integer");
}

inline double get_num(const json& o, const std::string& where) {
    if (!o.is_number()) throw ConfigError(where + " must be a number");
    return o.get<double>();
}

inline void require_object(const json& o, const std::string& where) {
    if (!o.is_object()) throw ConfigError(where + " must be an object");
}

template <size_t N, typename T, typename Get>
void fill_array(const json& o, std::array<T, N>& out, const std::string& where, Get get) {
    if (!o.is_array() || o.size() != N)
        throw ConfigError(where + " must be an array of " + std::to_string(N) + " entries");
    for (size_t i = 0; i < N; ++i)
        out[i] = get(o[i], where + "[" + std::to_string(i) + "]");
}

inline DatasetSpec parse_dataset(const json& o, const std::string& where) {
    require_object(o, where);
    DatasetSpec d;
    const std::string kind = get_string(need(o, "kind", where), where + ".kind");
    if (kind == "toy_glyphs") {
        reject_unknown(o, where, {"kind", "style", "per_class", "seed"});
        const std::string style = get_string(need(o, "style", where), where + ".style");
        if (style == "A") d.style = GlyphStyle::A;
        else if (style == "B") d.style = GlyphStyle::B;
        else throw ConfigError(where + ".style must be \"A\" or \"B\"");
        d.kind = DatasetSpec::Kind::toy_glyphs;
        d.per_class = get_int(need(o, "per_class", where), where + ".per_class");
        d.seed = get_u64(need(o, "seed", where), where + ".seed");
        if (d.per_class < 1) throw ConfigError(where + ".per_class must be positive");
    } else if (kind == "idx") {
        reject_unknown(o, where, {"kind", "images", "labels"});
        d.kind = DatasetSpec::Kind::idx;
        d.images = get_string(need(o, "images", where), where + ".images");
        if (o.contains("labels")) d.labels = get_string(o["labels"], where + ".labels");
    } else if (kind == "usps") {
        reject_unknown(o, where, {"kind", "path"});
        d.kind = DatasetSpec::Kind::usps;
        d.path = get_string(need(o, "path", where), where + ".path");
    } else {
        throw ConfigError(where + ".kind must be one of toy_glyphs, idx, usps");
    }
    return d;
}

inline Protocol parse_protocol(const json& o, const std::string& where) {
    require_object(o, where);
    const std::string kind = get_string(need(o, "kind", where), where + ".kind");
    if (kind == "full") {
        reject_unknown(o, where, {"kind"});
        return Protocol::full();
    }
    if (kind == "subsampled") {
        reject_unknown(o, where, {"kind", "n_source", "n_target"});
        return Protocol::subsampled(get_int(need(o, "n_source", where), where + ".n_source"),
                                    get_int(need(o, "n_target", where), where + ".n_target"));
    }
    if (kind == "partial") {
        reject_unknown(o, where, {"kind", "classes"});
        const json& arr = need(o, "classes", where);
        if (!arr.is_array() || arr.empty())
            throw ConfigError(where + ".classes must be a non-empty array");
        std::vector<int> subset;
        for (size_t i = 0; i < arr.size(); ++i)
            subset.push_back(static_cast<int>(
                get_int(arr[i], where + ".classes[" + std::to_string(i) + "]")));
        return Protocol::partial(std::move(subset));
    }
    throw ConfigError(where + ".kind must be one of full, subsampled, partial");
}

inline ArchConfig parse_arch(const json& o) {
    require_object(o, "arch");
    reject_unknown(o, "arch", {"family", "classes"});
    const std::string fam = get_string(need(o, "family", "arch"), "arch.family");
    ArchConfig a;
    if (fam == "digits") a.family = ArchFamily::digits;
    else if (fam == "digits_sm") a.family = ArchFamily::digits_sm;
    else if (fam == "signs") a.family = ArchFamily::signs;
    else if (fam == "toy") a.family = ArchFamily::toy;
    else throw ConfigError("arch.family must be one of digits, digits_sm, signs, toy");
    a.num_classes = get_int(need(o, "classes", "arch"), "arch.classes");
    return a;
}

inline LossWeights parse_weights(const json& o, LossWeights w) {
    require_object(o, "train.weights");
    reject_unknown(o, "train.weights",
                   {"adv_fea", "adv_img", "recon", "cls", "sem", "feedback", "entropy"});
    if (o.contains("adv_fea")) w.adv_fea = get_num(o["adv_fea"], "train.weights.adv_fea");
    if (o.contains("adv_img")) w.adv_img = get_num(o["adv_img"], "train.weights.adv_img");
    if (o.contains("recon")) w.recon = get_num(o["recon"], "train.weights.recon");
    if (o.contains("cls")) w.cls = get_num(o["cls"], "train.weights.cls");
    if (o.contains("sem")) w.sem = get_num(o["sem"], "train.weights.sem");
    if (o.contains("feedback")) w.feedback = get_num(o["feedback"], "train.weights.feedback");
    if (o.contains("entropy")) w.entropy = get_num(o["entropy"], "train.weights.entropy");
    return w;
}

inline TrainConfig parse_train(const json& o) {
    require_object(o, "train");
    reject_unknown(o, "train",
                   {"batch_size", "momentum", "weights", "ablate", "pretrain_iters",
                    "end_to_end_iters", "pretrain_lr", "end_to_end_lr", "repeat",
                    "eval_every"});
    TrainConfig t;
    if (o.contains("batch_size")) t.batch_size = get_int(o["batch_size"], "train.batch_size");
    if (o.contains("momentum")) t.momentum = get_num(o["momentum"], "train.momentum");
    if (o.contains("weights")) t.weights = parse_weights(o["weights"], t.weights);
    if (o.contains("ablate")) {
        const json& a = o["ablate"];
        require_object(a, "train.ablate");
        reject_unknown(a, "train.ablate", {"sem", "feedback", "entropy"});
        if (a.contains("sem"))
            t.weights.enable_sem = !get_bool(a["sem"], "train.ablate.sem");
        if (a.contains("feedback"))
            t.weights.enable_feedback = !get_bool(a["feedback"], "train.ablate.feedback");
        if (a.contains("entropy"))
            t.weights.enable_entropy = !get_bool(a["entropy"], "train.ablate.entropy");
    }
    if (o.contains("pretrain_iters"))
        fill_array(o["pretrain_iters"], t.pretrain_iters, "train.pretrain_iters", get_int);
    if (o.contains("end_to_end_iters"))
        fill_array(o["end_to_end_iters"], t.end_iters, "train.end_to_end_iters", get_int);
    if (o.contains("pretrain_lr"))
        fill_array(o["pretrain_lr"], t.pretrain_lr, "train.pretrain_lr", get_num);
    if (o.contains("end_to_end_lr"))
        fill_array(o["end_to_end_lr"], t.end_lr, "train.end_to_end_lr", get_num);
    if (o.contains("repeat")) t.refine_rounds = get_int(o["repeat"], "train.repeat");
    if (o.contains("eval_every")) t.eval_every = get_int(o["eval_every"], "train.eval_every");
    return t;
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& text) {
    detail::json root;
    try {
        root = detail::json::parse(text);
    } catch (const detail::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    detail::require_object(root, "config");
    detail::reject_unknown(root, "config",
                           {"seed", "out_dir", "arch", "data", "train", "eval"});
    RunConfig c;
    if (root.contains("seed")) c.seed = detail::get_u64(root["seed"], "seed");
    if (root.contains("out_dir")) c.out_dir = detail::get_string(root["out_dir"], "out_dir");
    c.arch = detail::parse_arch(detail::need(root, "arch", "config"));

    const detail::json& data = detail::need(root, "data", "config");
    detail::require_object(data, "data");
    detail::reject_unknown(data, "data",
                           {"source", "target", "source_test", "target_test", "protocol",
                            "image_size"});
    c.source = detail::parse_dataset(detail::need(data, "source", "data"), "data.source");
    c.target = detail::parse_dataset(detail::need(data, "target", "data"), "data.target");
    if (data.contains("source_test"))
        c.source_test = detail::parse_dataset(data["source_test"], "data.source_test");
    if (data.contains("target_test"))
        c.target_test = detail::parse_dataset(data["target_test"], "data.target_test");
    if (data.contains("protocol"))
        c.protocol = detail::parse_protocol(data["protocol"], "data.protocol");
    switch (c.arch.family) {
        case ArchFamily::toy: c.image_size = 16; break;
        case ArchFamily::digits:
        case ArchFamily::digits_sm: c.image_size = 32; break;
        case ArchFamily::signs: c.image_size = 40; break;
    }
    if (data.contains("image_size"))
        c.image_size = detail::get_int(data["image_size"], "data.image_size");

    if (root.contains("train")) c.train = detail::parse_train(root["train"]);
    if (root.contains("eval")) {
        const detail::json& e = root["eval"];
        detail::require_object(e, "eval");
        detail::reject_unknown(e, "eval", {"split", "semantic_samples"});
        if (e.contains("split")) c.eval.split = detail::get_string(e["split"], "eval.split");
        if (e.contains("semantic_samples"))
            c.eval.semantic_samples = detail::get_int(e["semantic_samples"],
                                                      "eval.semantic_samples");
    }
    c.validate();
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

/// Relative dataset paths resolve against the data root (FXDA_DATA_ROOT for
/// the CLI); absolute paths and an empty root pass through untouched.
inline std::string resolve_path(const std::string& p, const std::string& data_root) {
    if (data_root.empty() || p.empty() || p.front() == '/') return p;
    if (data_root.back() == '/') return data_root + p;
    return data_root + "/" + p;
}

inline ImageSet load_dataset(const DatasetSpec& d, Domain domain, int64_t num_classes,
                             const std::string& data_root = {}) {
    ImageSet set;
    switch (d.kind) {
        case DatasetSpec::Kind::toy_glyphs:
            set = generate_toy_glyphs(static_cast<int>(num_classes),
                                      static_cast<int>(d.per_class), d.style, d.seed);
            break;
        case DatasetSpec::Kind::idx:
            set = d.labels.empty()
                      ? load_idx(resolve_path(d.images, data_root))
                      : load_idx(resolve_path(d.images, data_root),
                                 resolve_path(d.labels, data_root));
            break;
        case DatasetSpec::Kind::usps: set = load_usps(resolve_path(d.path, data_root)); break;
    }
    set.domain_id = domain;
    return set;
}

inline TransferTask make_task_from(const RunConfig& c, const std::string& data_root = {}) {
    ImageSet src = load_dataset(c.source, Domain::source, c.arch.num_classes, data_root);
    ImageSet tgt = load_dataset(c.target, Domain::target, c.arch.num_classes, data_root);
    return make_task(std::move(src), std::move(tgt), c.protocol, c.image_size, c.seed);
}

namespace detail {

inline json dataset_to_json(const DatasetSpec& d) {
    json o;
    switch (d.kind) {
        case DatasetSpec::Kind::toy_glyphs:
            o["kind"] = "toy_glyphs";
            o["style"] = d.style == GlyphStyle::A ? "A" : "B";
            o["per_class"] = d.per_class;
            o["seed"] = d.seed;
            break;
        case DatasetSpec::Kind::idx:
            o["kind"] = "idx";
            o["images"] = d.images;
            if (!d.labels.empty()) o["labels"] = d.labels;
            break;
        case DatasetSpec::Kind::usps:
            o["kind"] = "usps";
            o["path"] = d.path;
            break;
    }
    return o;
}

}  // namespace detail

/// Serializes the effective configuration, flag overrides included, so the
/// run directory describes exactly what ran. Round trips through
/// parse_run_config.
inline std::string run_config_to_json(const RunConfig& c) {
    using detail::json;
    json root;
    root["seed"] = c.seed;
    root["out_dir"] = c.out_dir;
    switch (c.arch.family) {
        case ArchFamily::digits: root["arch"]["family"] = "digits"; break;
        case ArchFamily::digits_sm: root["arch"]["family"] = "digits_sm"; break;
        case ArchFamily::signs: root["arch"]["family"] = "signs"; break;
        case ArchFamily::toy: root["arch"]["family"] = "toy"; break;
    }
    root["arch"]["classes"] = c.arch.num_classes;

    json data;
    data["source"] = detail::dataset_to_json(c.source);
    data["target"] = detail::dataset_to_json(c.target);
    if (c.source_test) data["source_test"] = detail::dataset_to_json(*c.source_test);
    if (c.target_test) data["target_test"] = detail::dataset_to_json(*c.target_test);
    switch (c.protocol.kind) {
        case Protocol::Kind::full: data["protocol"]["kind"] = "full"; break;
        case Protocol::Kind::subsampled:
            data["protocol"]["kind"] = "subsampled";
            data["protocol"]["n_source"] = c.protocol.n_source;
            data["protocol"]["n_target"] = c.protocol.n_target;
            break;
        case Protocol::Kind::partial:
            data["protocol"]["kind"] = "partial";
            data["protocol"]["classes"] = c.protocol.class_subset;
            break;
    }
    data["image_size"] = c.image_size;
    root["data"] = std::move(data);

    json train;
    train["batch_size"] = c.train.batch_size;
    train["momentum"] = c.train.momentum;
    train["weights"]["adv_fea"] = c.train.weights.adv_fea;
    train["weights"]["adv_img"] = c.train.weights.adv_img;
    train["weights"]["recon"] = c.train.weights.recon;
    train["weights"]["cls"] = c.train.weights.cls;
    train["weights"]["sem"] = c.train.weights.sem;
    train["weights"]["feedback"] = c.train.weights.feedback;
    train["weights"]["entropy"] = c.train.weights.entropy;
    train["ablate"]["sem"] = !c.train.weights.enable_sem;
    train["ablate"]["feedback"] = !c.train.weights.enable_feedback;
    train["ablate"]["entropy"] = !c.train.weights.enable_entropy;
    train["pretrain_iters"] = c.train.pretrain_iters;
    train["end_to_end_iters"] = c.train.end_iters;
    train["pretrain_lr"] = c.train.pretrain_lr;
    train["end_to_end_lr"] = c.train.end_lr;
    train["repeat"] = c.train.refine_rounds;
    train["eval_every"] = c.train.eval_every;
    root["train"] = std::move(train);

    root["eval"]["split"] = c.eval.split;
    root["eval"]["semantic_samples"] = c.eval.semantic_samples;
    return root.dump(2) + "\n";
}

}  // namespace fxda
