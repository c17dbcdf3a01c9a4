// Command-line front end: data preparation, staged training, evaluation,
// style transfer, and embedding export, all driven by one JSON config.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <zlib.h>

#include "fxda/eval/evaluate.hpp"
#include "fxda/eval/grid.hpp"
#include "fxda/eval/report.hpp"
#include "fxda/eval/tsne.hpp"
#include "fxda/io/config.hpp"
#include "fxda/io/metrics.hpp"
#include "fxda/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace fxda;

namespace {

struct Args {
    std::string config;
    std::optional<uint64_t> seed;
    std::vector<std::string> ablate;
    std::string stage;
    std::string resume;
    std::string out;
};

std::string data_root() {
    const char* v = std::getenv("FXDA_DATA_ROOT");
    return v ? v : "";
}

std::string slurp_file(const std::string& path) {
    return read_file_bytes(path);
}

std::string crc_hex(const std::string& text) {
    const uint32_t crc = static_cast<uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(text.data()),
                static_cast<uInt>(text.size())));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08x", crc);
    return buf;
}

RunConfig load_effective(const Args& a) {
    RunConfig c = load_run_config(a.config);
    if (a.seed) c.seed = *a.seed;
    if (!a.out.empty()) c.out_dir = a.out;
    for (const std::string& name : a.ablate) {
        if (name == "sem") c.train.weights.enable_sem = false;
        else if (name == "feedback") c.train.weights.enable_feedback = false;
        else if (name == "entropy") c.train.weights.enable_entropy = false;
        else throw ConfigError("unknown ablation \"" + name + "\"");
    }
    c.validate();
    return c;
}

void write_run_dir(const RunConfig& c, const std::string& original) {
    fs::create_directories(c.out_dir);
    fs::create_directories(c.out_dir + "/checkpoints");
    write_file_bytes(c.out_dir + "/config.json", original);
    write_file_bytes(c.out_dir + "/config_effective.json", run_config_to_json(c));
}

/// The split the config asks for, resized to the task's working resolution.
ImageSet eval_set(const RunConfig& c, Domain domain) {
    const std::optional<DatasetSpec>& test =
        domain == Domain::source ? c.source_test : c.target_test;
    const DatasetSpec& train_spec = domain == Domain::source ? c.source : c.target;
    const DatasetSpec& spec = (c.eval.split == "test" && test) ? *test : train_spec;
    ImageSet set = load_dataset(spec, domain, c.arch.num_classes, data_root());
    set.images = resize_bilinear(set.images, c.image_size);
    if (domain == Domain::target && c.protocol.kind == Protocol::Kind::partial)
        set = filter_classes(set, c.protocol.class_subset);
    return set;
}

EvalReport run_eval(const RunConfig& c, TrainState& st, const ImageSet& src_eval,
                    const ImageSet& tgt_eval, const std::string& hash) {
    EvalReport rep;
    AccuracyReport tgt = evaluate(st.models, tgt_eval, Domain::target);
    rep.target_accuracy = tgt.accuracy;
    rep.classes = tgt.classes;
    rep.per_class = tgt.per_class;
    rep.source_accuracy = evaluate(st.models, src_eval, Domain::source).accuracy;
    rep.semantic_agreement = semantic_agreement(st.models, src_eval, tgt_eval,
                                                c.eval.semantic_samples, c.seed + st.step);
    rep.feedback_loss = feedback_probe(st.models, src_eval, tgt_eval,
                                       c.eval.semantic_samples, c.seed + st.step + 1);
    rep.config_hash = hash;
    rep.stage = stage_name(st.stage);
    rep.step = st.step;
    return rep;
}

std::string stage_checkpoint_name(const TrainState& st) {
    std::string name = stage_name(st.stage);
    if (st.refine_round > 0 && (st.stage == Stage::end2 || st.stage == Stage::end3))
        name += "_round" + std::to_string(st.refine_round + 1);
    return name + ".ckpt";
}

bool valid_stage_name(const std::string& s) {
    for (const char* n : {"pretrain1", "pretrain2", "pretrain3", "pretrain4", "end_to_end1",
                          "end_to_end2", "end_to_end3"})
        if (s == n) return true;
    return false;
}

int do_train(const Args& args, bool pretrain_only) {
    RunConfig cfg = load_effective(args);
    if (!args.stage.empty() && !valid_stage_name(args.stage))
        throw ConfigError("unknown stage \"" + args.stage + "\"");
    const std::string original = slurp_file(args.config);
    const std::string effective = run_config_to_json(cfg);
    const std::string hash = crc_hex(effective);

    TransferTask task = make_task_from(cfg, data_root());
    TrainState st =
        args.resume.empty() ? init_train_state(cfg.arch, cfg.seed) : load_checkpoint(args.resume);
    write_run_dir(cfg, original);

    ImageSet src_eval = eval_set(cfg, Domain::source);
    ImageSet tgt_eval = eval_set(cfg, Domain::target);

    MetricsWriter metrics(cfg.out_dir + "/metrics.csv", !args.resume.empty());
    TrainHooks hooks;
    hooks.on_step = [&](TrainState& s, const LossReport& r) {
        metrics.log_step(s.step, stage_name(s.stage), r);
        if (cfg.train.eval_every > 0 && s.step % cfg.train.eval_every == 0) {
            EvalReport rep = run_eval(cfg, s, src_eval, tgt_eval, hash);
            write_report(rep, cfg.out_dir + "/reports");
            if (rep.target_accuracy > s.best_metric) {
                s.best_metric = rep.target_accuracy;
                s.best_step = s.step;
                save_checkpoint(s, cfg.out_dir + "/checkpoints/best.ckpt");
            }
        }
    };
    hooks.on_stage_end = [&](TrainState& s) {
        metrics.flush();
        save_checkpoint(s, cfg.out_dir + "/checkpoints/" + stage_checkpoint_name(s));
        save_checkpoint(s, cfg.out_dir + "/checkpoints/latest.ckpt");
        std::cout << "stage " << stage_name(s.stage) << " done at step " << s.step << "\n";
    };

    while (st.stage != Stage::done && !(pretrain_only && !is_pretrain(st.stage))) {
        const std::string running = stage_name(st.stage);
        run_single_stage(st, task, cfg.train, hooks);
        if (!args.stage.empty() && running == args.stage) break;
    }
    metrics.flush();

    if (st.stage == Stage::done) {
        EvalReport rep = run_eval(cfg, st, src_eval, tgt_eval, hash);
        write_report(rep, cfg.out_dir + "/reports");
        std::cout << "final target accuracy " << g17(rep.target_accuracy)
                  << ", source accuracy " << g17(rep.source_accuracy) << "\n";
    }
    std::cout << "stopped at stage " << stage_name(st.stage) << ", step " << st.step << "\n";
    return 0;
}

int cmd_prepare(const Args& args) {
    RunConfig cfg = load_effective(args);
    const std::string original = slurp_file(args.config);
    write_run_dir(cfg, original);
    fs::create_directories(cfg.out_dir + "/cache");
    fs::create_directories(cfg.out_dir + "/grids");

    std::map<std::string, const DatasetSpec*> specs = {{"source", &cfg.source},
                                                       {"target", &cfg.target}};
    if (cfg.source_test) specs["source_test"] = &*cfg.source_test;
    if (cfg.target_test) specs["target_test"] = &*cfg.target_test;

    std::string summary = "{\n";
    bool first = true;
    for (const auto& [name, spec] : specs) {
        const Domain domain =
            name.rfind("source", 0) == 0 ? Domain::source : Domain::target;
        ImageSet set = load_dataset(*spec, domain, cfg.arch.num_classes, data_root());
        set.validate(name.c_str());

        ByteWriter w;
        w.u32(static_cast<uint32_t>(set.class_count));
        w.u32(static_cast<uint32_t>(set.labels.size()));
        for (int lab : set.labels) w.u32(static_cast<uint32_t>(lab));
        w.tensor(set.images);
        write_file_bytes(cfg.out_dir + "/cache/" + name + ".bin", w.bytes());

        std::vector<std::vector<Tensor>> preview(1);
        Tensor resized = resize_bilinear(set.images, cfg.image_size);
        for (int64_t i = 0; i < std::min<int64_t>(8, set.count()); ++i)
            preview[0].push_back(slice_image(resized, i));
        render_grid(preview, cfg.out_dir + "/grids/preview_" + name + ".png");

        std::map<int, int64_t> hist;
        for (int lab : set.labels) ++hist[lab];
        summary += first ? "" : ",\n";
        first = false;
        summary += "  \"" + name + "\": {\"count\": " + std::to_string(set.count()) +
                   ", \"height\": " + std::to_string(set.height()) +
                   ", \"width\": " + std::to_string(set.width()) +
                   ", \"channels\": " + std::to_string(set.channels()) +
                   ", \"classes\": " + std::to_string(hist.size()) + "}";
        std::cout << name << ": " << set.count() << " samples, " << hist.size()
                  << " classes\n";
    }
    summary += ",\n  \"protocol\": \"" + cfg.protocol.describe() + "\"\n}\n";
    write_file_bytes(cfg.out_dir + "/prepare_summary.json", summary);
    return 0;
}

TrainState state_for_inspection(const RunConfig& cfg, const Args& args) {
    const std::string path =
        args.resume.empty() ? cfg.out_dir + "/checkpoints/latest.ckpt" : args.resume;
    if (!fs::exists(path))
        throw ConfigError("no checkpoint at " + path + "; train first or pass --resume");
    return load_checkpoint(path);
}

int cmd_eval(const Args& args) {
    RunConfig cfg = load_effective(args);
    TrainState st = state_for_inspection(cfg, args);
    const std::string hash = crc_hex(run_config_to_json(cfg));
    fs::create_directories(cfg.out_dir);

    ImageSet src_eval = eval_set(cfg, Domain::source);
    ImageSet tgt_eval = eval_set(cfg, Domain::target);
    EvalReport rep = run_eval(cfg, st, src_eval, tgt_eval, hash);
    write_report(rep, cfg.out_dir + "/reports");
    std::cout << "stage " << rep.stage << " step " << rep.step << "\n"
              << "target accuracy " << g17(rep.target_accuracy) << "\n"
              << "source accuracy " << g17(rep.source_accuracy) << "\n"
              << "semantic agreement " << g17(rep.semantic_agreement) << "\n"
              << "feedback loss " << g17(rep.feedback_loss) << "\n";
    return 0;
}

int cmd_transfer(const Args& args) {
    RunConfig cfg = load_effective(args);
    TrainState st = state_for_inspection(cfg, args);
    fs::create_directories(cfg.out_dir + "/grids");

    ImageSet src = eval_set(cfg, Domain::source);
    ImageSet tgt = eval_set(cfg, Domain::target);
    const int64_t k = std::min<int64_t>({8, src.count(), tgt.count()});
    Rng rng(cfg.seed + 17);
    std::vector<int64_t> src_rows, tgt_rows;
    for (int64_t i = 0; i < k; ++i) {
        src_rows.push_back(rng.below(src.count()));
        tgt_rows.push_back(rng.below(tgt.count()));
    }

    Tape t;
    NodeId xs = t.leaf(gather_images(src.images, src_rows));
    NodeId xt = t.leaf(gather_images(tgt.images, tgt_rows));
    FeaturePair fs_pair = st.models.f_s.extract(t, xs, false);
    FeaturePair ft_pair = st.models.f_t.extract(t, xt, false);
    NodeId zero_s = t.leaf(Tensor(t.val(fs_pair.specific).shape()));
    NodeId zero_c = t.leaf(Tensor(t.val(fs_pair.common).shape()));

    auto batch_rows = [&](NodeId images) {
        std::vector<Tensor> row;
        for (int64_t i = 0; i < k; ++i) row.push_back(slice_image(t.val(images), i));
        return row;
    };

    struct Sheet {
        const char* file;
        NodeId originals, mixed, specific_only, common_only;
    };
    const Sheet sheets[2] = {
        {"transfer_to_source",  // source style carrying target content
         xt, st.models.g_s.generate(t, fs_pair.specific, ft_pair.common, false),
         st.models.g_s.generate(t, fs_pair.specific, zero_c, false),
         st.models.g_s.generate(t, zero_s, ft_pair.common, false)},
        {"transfer_to_target",
         xs, st.models.g_t.generate(t, ft_pair.specific, fs_pair.common, false),
         st.models.g_t.generate(t, ft_pair.specific, zero_c, false),
         st.models.g_t.generate(t, zero_s, fs_pair.common, false)},
    };
    for (const Sheet& s : sheets) {
        const std::string base = cfg.out_dir + "/grids/" + s.file;
        render_grid({batch_rows(s.originals), batch_rows(s.mixed), batch_rows(s.specific_only),
                     batch_rows(s.common_only)},
                    base + ".png");
        write_file_bytes(base + ".png.txt",
                         "row 1: content donor originals\n"
                         "row 2: transferred (borrowed specific + donor common)\n"
                         "row 3: specific part only (common masked)\n"
                         "row 4: common part only (specific masked)\n");
        std::cout << "wrote " << base << ".png\n";
    }
    return 0;
}

int cmd_embed(const Args& args) {
    RunConfig cfg = load_effective(args);
    TrainState st = state_for_inspection(cfg, args);
    fs::create_directories(cfg.out_dir + "/embeddings");

    ImageSet src = eval_set(cfg, Domain::source);
    ImageSet tgt = eval_set(cfg, Domain::target);
    Rng rng(cfg.seed + 29);
    const int64_t per = std::min<int64_t>({240, src.count(), tgt.count()});

    std::vector<int64_t> src_rows, tgt_rows;
    for (int64_t i = 0; i < per; ++i) {
        src_rows.push_back(rng.below(src.count()));
        tgt_rows.push_back(rng.below(tgt.count()));
    }

    Tape t;
    FeaturePair fs_pair =
        st.models.f_s.extract(t, t.leaf(gather_images(src.images, src_rows)), false);
    FeaturePair ft_pair =
        st.models.f_t.extract(t, t.leaf(gather_images(tgt.images, tgt_rows)), false);

    auto stack = [&](NodeId a, NodeId b) {
        const Tensor& ta = t.val(a);
        const Tensor& tb = t.val(b);
        Tensor out({ta.dim(0) + tb.dim(0), ta.dim(1)});
        std::copy(ta.data(), ta.data() + ta.size(), out.data());
        std::copy(tb.data(), tb.data() + tb.size(), out.data() + ta.size());
        return out;
    };
    std::vector<std::string> domains;
    std::vector<int> classes;
    for (int64_t i = 0; i < per; ++i) {
        domains.push_back("source");
        classes.push_back(src.labels[static_cast<size_t>(src_rows[static_cast<size_t>(i)])]);
    }
    for (int64_t i = 0; i < per; ++i) {
        domains.push_back("target");
        classes.push_back(tgt.labels[static_cast<size_t>(tgt_rows[static_cast<size_t>(i)])]);
    }

    const struct {
        const char* part;
        NodeId a, b;
        uint64_t seed;
    } sheets[2] = {{"common", fs_pair.common, ft_pair.common, cfg.seed + 31},
                   {"specific", fs_pair.specific, ft_pair.specific, cfg.seed + 37}};
    const double perplexity = std::min(30.0, static_cast<double>(2 * per) / 4.0);
    for (const auto& s : sheets) {
        Tensor pts = embed_2d(stack(s.a, s.b), perplexity, s.seed);
        std::vector<std::string> parts(static_cast<size_t>(pts.dim(0)), s.part);
        const std::string path = cfg.out_dir + "/embeddings/" + s.part + ".tsv";
        write_embedding_tsv(path, pts, domains, classes, parts);
        std::cout << "wrote " << path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"disentangled feature exchange: staged training and analysis"};
    app.require_subcommand(1);

    Args args;
    auto add_common = [&](CLI::App* cmd, bool with_stage) {
        cmd->add_option("--config", args.config, "run config JSON")->required();
        cmd->add_option("--seed", args.seed, "override config seed");
        cmd->add_option("--ablate", args.ablate, "disable a loss family")
            ->check(CLI::IsMember({"sem", "feedback", "entropy"}));
        cmd->add_option("--resume", args.resume, "checkpoint to continue from");
        cmd->add_option("--out", args.out, "override output directory");
        if (with_stage)
            cmd->add_option("--stage", args.stage, "stop after this stage completes");
    };

    CLI::App* prepare = app.add_subcommand("prepare", "validate and cache the datasets");
    add_common(prepare, false);
    CLI::App* pretrain_cmd = app.add_subcommand("pretrain", "run the pretraining stages");
    add_common(pretrain_cmd, true);
    CLI::App* train = app.add_subcommand("train", "run all remaining training stages");
    add_common(train, true);
    CLI::App* eval_cmd = app.add_subcommand("eval", "score a checkpoint and write a report");
    add_common(eval_cmd, false);
    CLI::App* transfer = app.add_subcommand("transfer", "write style-transfer grids");
    add_common(transfer, false);
    CLI::App* embed = app.add_subcommand("embed", "export 2-D feature embeddings");
    add_common(embed, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (prepare->parsed()) return cmd_prepare(args);
        if (pretrain_cmd->parsed()) return do_train(args, true);
        if (train->parsed()) return do_train(args, false);
        if (eval_cmd->parsed()) return cmd_eval(args);
        if (transfer->parsed()) return cmd_transfer(args);
        if (embed->parsed()) return cmd_embed(args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
