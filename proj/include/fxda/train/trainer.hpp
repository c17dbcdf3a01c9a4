#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fxda/core/error.hpp"
#include "fxda/data/task.hpp"
#include "fxda/exchange/exchange.hpp"
#include "fxda/io/bytes.hpp"
#include "fxda/losses/losses.hpp"
#include "fxda/nn/models.hpp"

// Staged training: four pretraining stages grow the network piece by piece
// (classifier, generator, feature discriminator, image discriminators), then
// three end-to-end stages run the full adversarial game, first without the
// entropy refinement and finally with it at a reduced learning rate. Each
// two-phase iteration alternates one discriminator update on detached inputs
// with one generator/extractor update through the live graph, on the same
// batch.

namespace fxda {

enum class Stage {
    pretrain1,
    pretrain2,
    pretrain3,
    pretrain4,
    end1,
    end2,
    end3,
    done,
};

inline const char* stage_name(Stage s) {
    switch (s) {
        case Stage::pretrain1: return "pretrain1";
        case Stage::pretrain2: return "pretrain2";
        case Stage::pretrain3: return "pretrain3";
        case Stage::pretrain4: return "pretrain4";
        case Stage::end1: return "end_to_end1";
        case Stage::end2: return "end_to_end2";
        case Stage::end3: return "end_to_end3";
        case Stage::done: return "done";
    }
    return "?";
}

inline bool is_pretrain(Stage s) { return static_cast<int>(s) <= static_cast<int>(Stage::pretrain4); }
inline bool is_end_to_end(Stage s) {
    return s == Stage::end1 || s == Stage::end2 || s == Stage::end3;
}

enum class Phase { disc, gen };

struct TrainConfig {
    int64_t batch_size = 64;
    double momentum = 0.9;
    LossWeights weights;
    std::array<int64_t, 4> pretrain_iters{20000, 5000, 25000, 5000};
    std::array<int64_t, 3> end_iters{39000, 20000, 2000};
    std::array<double, 4> pretrain_lr{0.01, 0.01, 0.001, 0.001};
    std::array<double, 3> end_lr{0.001, 0.001, 0.0001};
    int64_t refine_rounds = 1;  // how many (stage 2, stage 3) passes end-to-end
    int64_t eval_every = 0;     // 0 = caller never asked for periodic hooks

    void validate() const {
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (!(momentum >= 0.0 && momentum < 1.0))
            throw ConfigError("momentum must lie in [0,1)");
        for (int64_t n : pretrain_iters)
            if (n < 1) throw ConfigError("pretrain iterations must be positive");
        for (int64_t n : end_iters)
            if (n < 1) throw ConfigError("end-to-end iterations must be positive");
        for (double lr : pretrain_lr)
            if (!(lr > 0.0)) throw ConfigError("pretrain learning rates must be positive");
        for (double lr : end_lr)
            if (!(lr > 0.0)) throw ConfigError("end-to-end learning rates must be positive");
        if (refine_rounds < 1) throw ConfigError("refine_rounds must be >= 1");
        if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
        weights.validate();
    }
};

struct TrainState {
    ArchConfig arch;
    uint64_t seed = 0;
    ModelSet models;
    std::vector<Tensor> velocity;  // aligned with models.networks() params, flat
    Stage stage = Stage::pretrain1;
    int64_t step_in_stage = 0;
    int64_t step = 0;
    int64_t refine_round = 0;  // completed (end2, end3) pairs
    Rng rng{0};                // per-iteration pairing seeds
    Sampler sampler;
    double best_metric = 0.0;
    int64_t best_step = -1;
};

inline TrainState init_train_state(const ArchConfig& arch, uint64_t seed) {
    TrainState st{arch, seed, init_models(arch, seed)};
    for (const NetRef& net : st.models.networks())
        for (const Param* p : net.params) st.velocity.emplace_back(p->value.shape());
    Rng root(seed);
    Rng meta = root.fork(8);  // model networks consumed streams 0..7
    st.rng = meta.fork(0);
    st.sampler = make_sampler(meta.next_u64());
    return st;
}

namespace detail {

inline int64_t velocity_offset(ModelSet& m, const std::string& name) {
    int64_t off = 0;
    for (const NetRef& net : m.networks()) {
        if (net.name == name) return off;
        off += static_cast<int64_t>(net.params.size());
    }
    throw ContractError("unknown network " + name);
}

}  // namespace detail

// one momentum-sgd update for every parameter of the named network
inline void sgd_step_net(TrainState& st, const char* name, double lr, double momentum) {
    NetRef net = st.models.net(name);
    int64_t off = detail::velocity_offset(st.models, name);
    for (size_t k = 0; k < net.params.size(); ++k) {
        Param& p = *net.params[k];
        Tensor& v = st.velocity[static_cast<size_t>(off) + k];
        for (int64_t i = 0; i < v.size(); ++i) {
            v[i] = momentum * v[i] - lr * p.grad[i];
            p.value[i] += v[i];
        }
    }
}

inline void reset_velocity(TrainState& st, const char* name) {
    NetRef net = st.models.net(name);
    int64_t off = detail::velocity_offset(st.models, name);
    for (size_t k = 0; k < net.params.size(); ++k)
        st.velocity[static_cast<size_t>(off) + k].fill(0.0);
}

struct StageSpec {
    bool two_phase = false;     // feature/image discriminators alternate from stage 3 on
    bool use_recon = false;
    bool shared_recon = false;  // pretraining stage 2: both domains through the source nets
    bool use_adv_img = false;
    bool use_sem = false;
    bool use_feedback = false;
    bool use_entropy = false;
    std::vector<const char*> gen_nets;
    std::vector<const char*> disc_nets;
};

inline StageSpec stage_spec(Stage s) {
    StageSpec sp;
    switch (s) {
        case Stage::pretrain1:
            sp.gen_nets = {"f_s", "f_c"};
            return sp;
        case Stage::pretrain2:
            sp.use_recon = true;
            sp.shared_recon = true;
            sp.gen_nets = {"f_s", "g_s", "f_c"};
            return sp;
        case Stage::pretrain3:
            sp.two_phase = true;
            sp.use_recon = true;
            sp.gen_nets = {"f_s", "f_t", "g_s", "g_t", "f_c"};
            sp.disc_nets = {"d_f"};
            return sp;
        case Stage::pretrain4:
        case Stage::end1:
        case Stage::end2:
        case Stage::end3:
            sp.two_phase = true;
            sp.use_recon = true;
            sp.use_adv_img = true;
            sp.gen_nets = {"f_s", "f_t", "g_s", "g_t", "f_c"};
            sp.disc_nets = {"d_f", "d_s", "d_t"};
            if (s != Stage::pretrain4) {
                sp.use_sem = true;
                sp.use_feedback = true;
            }
            if (s == Stage::end3) sp.use_entropy = true;
            return sp;
        case Stage::done: break;
    }
    throw ScheduleError("no stage spec for completed training");
}

inline double stage_lr(const TrainConfig& cfg, Stage s) {
    switch (s) {
        case Stage::pretrain1: return cfg.pretrain_lr[0];
        case Stage::pretrain2: return cfg.pretrain_lr[1];
        case Stage::pretrain3: return cfg.pretrain_lr[2];
        case Stage::pretrain4: return cfg.pretrain_lr[3];
        case Stage::end1: return cfg.end_lr[0];
        case Stage::end2: return cfg.end_lr[1];
        case Stage::end3: return cfg.end_lr[2];
        case Stage::done: break;
    }
    throw ScheduleError("no learning rate for completed training");
}

inline int64_t stage_iters(const TrainConfig& cfg, Stage s) {
    switch (s) {
        case Stage::pretrain1: return cfg.pretrain_iters[0];
        case Stage::pretrain2: return cfg.pretrain_iters[1];
        case Stage::pretrain3: return cfg.pretrain_iters[2];
        case Stage::pretrain4: return cfg.pretrain_iters[3];
        case Stage::end1: return cfg.end_iters[0];
        case Stage::end2: return cfg.end_iters[1];
        case Stage::end3:
            // with the entropy term ablated the refinement stage has nothing
            // new to optimize, so it collapses to a no-op
            return cfg.end_iters[2];
        case Stage::done: break;
    }
    throw ScheduleError("no iteration count for completed training");
}

namespace detail {

// discriminator phase: every input the discriminators see is detached, so
// gradients stop at the features/images and only d_f/d_s/d_t learn
inline NodeId build_disc_objective(Tape& t, TrainState& st, const PairedBatch& b,
                                   const TrainConfig& cfg, const StageSpec& sp,
                                   uint64_t pairing_seed, LossReport& rep) {
    ModelSet& m = st.models;
    const LossWeights& w = cfg.weights;
    NodeId xs = t.leaf(b.source_images);
    NodeId xt = t.leaf(b.target_images);
    FeaturePair fs = m.f_s.extract(t, xs, true);
    FeaturePair ft = m.f_t.extract(t, xt, true);
    FeaturePair fs_d{ops::detach(t, fs.specific), ops::detach(t, fs.common)};
    FeaturePair ft_d{ops::detach(t, ft.specific), ops::detach(t, ft.common)};

    DiscOut df_cs = m.d_f.discriminate(t, fs_d.common, true);
    DiscOut df_ct = m.d_f.discriminate(t, ft_d.common, true);
    losses::AdvTerms fea = losses::adv_fea(t, df_cs, df_ct, b.source_labels);
    rep.adv_fea_type = t.scalar(fea.type_term);
    rep.adv_fea_cls = t.scalar(fea.cls_term);
    NodeId obj = ops::scale(t, ops::add(t, fea.type_term, fea.cls_term), w.adv_fea);

    std::optional<DiscOut> on_fake_s, on_real_t;
    if (sp.use_adv_img) {
        ExchangeResult ex = exchange(t, fs_d, b.source_labels, ft_d, pairing_seed);
        NodeId fake_s = ops::detach(t, generate_mixed(t, m, ex.for_g_s, true));
        NodeId fake_t = ops::detach(t, generate_mixed(t, m, ex.for_g_t, true));
        DiscOut real_s = m.d_s.discriminate(t, xs, true);
        on_fake_s = m.d_s.discriminate(t, fake_s, true);
        on_real_t = m.d_t.discriminate(t, xt, true);
        DiscOut fake_td = m.d_t.discriminate(t, fake_t, true);
        losses::AdvTerms src = losses::adv_img_source(t, real_s, *on_fake_s, b.source_labels);
        losses::AdvTerms tgt =
            losses::adv_img_target(t, *on_real_t, fake_td, ex.for_g_t.borrowed_labels);
        rep.adv_img_src_type = t.scalar(src.type_term);
        rep.adv_img_src_cls = t.scalar(src.cls_term);
        rep.adv_img_tgt_type = t.scalar(tgt.type_term);
        rep.adv_img_tgt_cls = t.scalar(tgt.cls_term);
        NodeId img = ops::add(t, ops::add(t, src.type_term, src.cls_term),
                              ops::add(t, tgt.type_term, tgt.cls_term));
        obj = ops::add_scaled(t, obj, img, w.adv_img);
    }

    if (sp.use_entropy && w.enable_entropy) {
        NodeId ent = losses::entropy_loss(t, ops::softmax_rows(t, on_fake_s->class_logits),
                                          ops::softmax_rows(t, on_real_t->class_logits),
                                          ops::softmax_rows(t, df_ct.class_logits));
        obj = ops::add_scaled(t, obj, ent, w.entropy);
    }
    return obj;
}

// generator/extractor phase: the full live graph; discriminators participate
// with frozen parameters and the type terms flip to the non-saturating form
inline NodeId build_gen_objective(Tape& t, TrainState& st, const PairedBatch& b,
                                  const TrainConfig& cfg, const StageSpec& sp,
                                  uint64_t pairing_seed, LossReport& rep) {
    ModelSet& m = st.models;
    const LossWeights& w = cfg.weights;
    NodeId xs = t.leaf(b.source_images);
    NodeId xt = t.leaf(b.target_images);
    FeaturePair fs = m.f_s.extract(t, xs, true);

    NodeId cls =
        losses::classification(t, m.f_c.classify(t, fs.common, true), b.source_labels);
    rep.cls = t.scalar(cls);
    NodeId obj = ops::scale(t, cls, w.cls);

    if (sp.shared_recon) {
        // stage 2 trains a single network: target images run through the
        // source extractor/generator pair as well
        FeaturePair ft_shared = m.f_s.extract(t, xt, true);
        NodeId xs_hat = m.g_s.generate(t, fs.specific, fs.common, true);
        NodeId xt_hat = m.g_s.generate(t, ft_shared.specific, ft_shared.common, true);
        NodeId recon = losses::reconstruction(t, xs, xs_hat, xt, xt_hat);
        rep.recon = t.scalar(recon);
        obj = ops::add_scaled(t, obj, recon, w.recon);
    }

    if (!sp.two_phase) return obj;

    FeaturePair ft = m.f_t.extract(t, xt, true);

    if (sp.use_recon && !sp.shared_recon) {
        NodeId xs_hat = m.g_s.generate(t, fs.specific, fs.common, true);
        NodeId xt_hat = m.g_t.generate(t, ft.specific, ft.common, true);
        NodeId recon = losses::reconstruction(t, xs, xs_hat, xt, xt_hat);
        rep.recon = t.scalar(recon);
        obj = ops::add_scaled(t, obj, recon, w.recon);
    }

    DiscOut df_cs = m.d_f.discriminate(t, fs.common, true);
    DiscOut df_ct = m.d_f.discriminate(t, ft.common, true);
    losses::AdvTerms fea = losses::adv_fea(t, df_cs, df_ct, b.source_labels);
    NodeId fea_gen = losses::adv_fea_gen_type(t, df_cs, df_ct);
    obj = ops::add_scaled(t, obj, ops::add(t, fea_gen, fea.cls_term), w.adv_fea);

    ExchangeResult ex = exchange(t, fs, b.source_labels, ft, pairing_seed);

    std::optional<DiscOut> on_fake_s, on_real_t;
    if (sp.use_adv_img) {
        NodeId fake_s = generate_mixed(t, m, ex.for_g_s, true);
        NodeId fake_t = generate_mixed(t, m, ex.for_g_t, true);
        on_fake_s = m.d_s.discriminate(t, fake_s, true);
        DiscOut on_fake_t = m.d_t.discriminate(t, fake_t, true);
        NodeId types = ops::add(t, losses::adv_img_gen_type(t, *on_fake_s, "adv_img_src_type"),
                                losses::adv_img_gen_type(t, on_fake_t, "adv_img_tgt_type"));
        NodeId tgt_cls = losses::detail::checked(
            t, ops::softmax_xent_mean(t, on_fake_t.class_logits, ex.for_g_t.borrowed_labels),
            "adv_img_tgt_cls");
        obj = ops::add_scaled(t, obj, ops::add(t, types, tgt_cls), w.adv_img);
    }

    if (sp.use_feedback && w.enable_feedback) {
        FeaturePair back_s = feedback_cycle(t, m, ex.for_g_s, true);
        FeaturePair back_t = feedback_cycle(t, m, ex.for_g_t, true);
        NodeId fb_s = losses::feedback(t, ex.for_g_s.specific, ex.for_g_s.common,
                                       back_s.specific, back_s.common, "feedback_src");
        NodeId fb_t = losses::feedback(t, ex.for_g_t.specific, ex.for_g_t.common,
                                       back_t.specific, back_t.common, "feedback_tgt");
        rep.feedback_src = t.scalar(fb_s);
        rep.feedback_tgt = t.scalar(fb_t);
        obj = ops::add_scaled(t, obj, ops::add(t, fb_s, fb_t), w.feedback);
    }

    if ((sp.use_sem && w.enable_sem) || (sp.use_entropy && w.enable_entropy))
        on_real_t = m.d_t.discriminate(t, xt, true);

    if (sp.use_sem && w.enable_sem) {
        NodeId probs_real = ops::softmax_rows(t, on_real_t->class_logits);
        NodeId probs_mixed = ops::softmax_rows(t, on_fake_s->class_logits);
        NodeId sem = losses::semantic_consistency(t, probs_real, probs_mixed,
                                                  ex.for_g_s.donor_of_row);
        rep.semantic = t.scalar(sem);
        obj = ops::add_scaled(t, obj, sem, w.sem);
    }

    if (sp.use_entropy && w.enable_entropy) {
        NodeId ent = losses::entropy_loss(t, ops::softmax_rows(t, on_fake_s->class_logits),
                                          ops::softmax_rows(t, on_real_t->class_logits),
                                          ops::softmax_rows(t, df_ct.class_logits));
        rep.entropy = t.scalar(ent);
        obj = ops::add_scaled(t, obj, ent, w.entropy);
    }
    return obj;
}

inline LossReport train_step_seeded(TrainState& st, const PairedBatch& b,
                                            const TrainConfig& cfg, Phase phase,
                                            uint64_t pairing_seed) {
    StageSpec sp = stage_spec(st.stage);
    if (phase == Phase::disc && !sp.two_phase)
        throw ScheduleError(std::string("stage ") + stage_name(st.stage) +
                            " has no discriminator phase");
    const double lr = stage_lr(cfg, st.stage);
    st.models.zero_grads();
    LossReport rep;
    Tape t;
    NodeId obj = phase == Phase::disc
                     ? build_disc_objective(t, st, b, cfg, sp, pairing_seed, rep)
                     : build_gen_objective(t, st, b, cfg, sp, pairing_seed, rep);
    t.backward(obj);
    const auto& nets = phase == Phase::disc ? sp.disc_nets : sp.gen_nets;
    for (const char* name : nets) sgd_step_net(st, name, lr, cfg.momentum);
    return rep;
}

}  // namespace detail

/// One optimizer step for the given phase. Draws a fresh pairing seed, so the
/// scheduled loop below shares one seed across the two phases of an iteration
/// instead of calling this directly.
inline LossReport train_step(TrainState& st, const PairedBatch& b,
                                     const TrainConfig& cfg, Phase phase) {
    return detail::train_step_seeded(st, b, cfg, phase, st.rng.next_u64());
}

inline void copy_source_to_target(TrainState& st) {
    copy_network(st.models.f_s, st.models.f_t);
    copy_network(st.models.g_s, st.models.g_t);
    reset_velocity(st, "f_t");
    reset_velocity(st, "g_t");
}

struct TrainHooks {
    std::function<void(TrainState&, const LossReport&)> on_step;
    std::function<void(TrainState&)> on_stage_start;
    std::function<void(TrainState&)> on_stage_end;
};

namespace detail {

inline void stage_entry_actions(TrainState& st) {
    switch (st.stage) {
        case Stage::pretrain3:
            // duplicate the trained network into the target copy
            copy_network(st.models.f_s, st.models.f_t);
            copy_network(st.models.g_s, st.models.g_t);
            reset_velocity(st, "f_t");
            reset_velocity(st, "g_t");
            break;
        case Stage::pretrain4:
            // the image discriminators share the extractor trunk layout, so
            // they start from the trained convolutional weights; the scoring
            // heads stay freshly initialized
            seed_discriminator_from_extractor(st.models.f_s, st.models.d_s);
            seed_discriminator_from_extractor(st.models.f_t, st.models.d_t);
            break;
        case Stage::end2:
            copy_source_to_target(st);
            break;
        default: break;
    }
}

inline void advance_stage(TrainState& st, const TrainConfig& cfg) {
    st.step_in_stage = 0;
    switch (st.stage) {
        case Stage::pretrain1: st.stage = Stage::pretrain2; return;
        case Stage::pretrain2: st.stage = Stage::pretrain3; return;
        case Stage::pretrain3: st.stage = Stage::pretrain4; return;
        case Stage::pretrain4: st.stage = Stage::end1; return;
        case Stage::end1: st.stage = Stage::end2; return;
        case Stage::end2: st.stage = Stage::end3; return;
        case Stage::end3:
            ++st.refine_round;
            st.stage = st.refine_round < cfg.refine_rounds ? Stage::end2 : Stage::done;
            return;
        case Stage::done: throw ScheduleError("training already complete");
    }
}

inline void run_stage(TrainState& st, const TransferTask& task, const TrainConfig& cfg,
                      const TrainHooks& hooks) {
    StageSpec sp = stage_spec(st.stage);
    int64_t iters = stage_iters(cfg, st.stage);
    if (st.stage == Stage::end3 && !cfg.weights.enable_entropy)
        iters = 0;  // the refinement stage exists only for the entropy term
    if (st.step_in_stage == 0) {
        stage_entry_actions(st);
        if (hooks.on_stage_start) hooks.on_stage_start(st);
    }
    while (st.step_in_stage < iters) {
        PairedBatch b = next_batch(task, cfg.batch_size, st.sampler);
        const uint64_t pairing_seed = st.rng.next_u64();
        LossReport rep;
        try {
            if (sp.two_phase) {
                LossReport rd =
                    detail::train_step_seeded(st, b, cfg, Phase::disc, pairing_seed);
                rep = detail::train_step_seeded(st, b, cfg, Phase::gen, pairing_seed);
                rep.adv_fea_type = rd.adv_fea_type;
                rep.adv_fea_cls = rd.adv_fea_cls;
                rep.adv_img_src_type = rd.adv_img_src_type;
                rep.adv_img_src_cls = rd.adv_img_src_cls;
                rep.adv_img_tgt_type = rd.adv_img_tgt_type;
                rep.adv_img_tgt_cls = rd.adv_img_tgt_cls;
            } else {
                rep = detail::train_step_seeded(st, b, cfg, Phase::gen, pairing_seed);
            }
            rep.total = total(rep, cfg.weights, Role::generator_extractor);
            rep.check_finite();
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " at step " + std::to_string(st.step));
        }
        ++st.step;
        ++st.step_in_stage;
        if (hooks.on_step) hooks.on_step(st, rep);
    }
    if (hooks.on_stage_end) hooks.on_stage_end(st);
    detail::advance_stage(st, cfg);
}

}  // namespace detail

inline void pretrain(TrainState& st, const TransferTask& task, const TrainConfig& cfg,
                     const TrainHooks& hooks = {}) {
    cfg.validate();
    if (!is_pretrain(st.stage))
        throw ScheduleError(std::string("pretraining already finished (stage ") +
                            stage_name(st.stage) + ")");
    while (is_pretrain(st.stage)) detail::run_stage(st, task, cfg, hooks);
}

inline void train_end_to_end(TrainState& st, const TransferTask& task, const TrainConfig& cfg,
                             const TrainHooks& hooks = {}) {
    cfg.validate();
    if (is_pretrain(st.stage))
        throw ScheduleError("end-to-end training invoked before pretraining completed");
    if (st.stage == Stage::done) throw ScheduleError("training already complete");
    while (st.stage != Stage::done) detail::run_stage(st, task, cfg, hooks);
}

/// Runs exactly the stage the state currently sits in, then advances the tag.
inline void run_single_stage(TrainState& st, const TransferTask& task, const TrainConfig& cfg,
                             const TrainHooks& hooks = {}) {
    cfg.validate();
    if (st.stage == Stage::done) throw ScheduleError("training already complete");
    detail::run_stage(st, task, cfg, hooks);
}

// ---------------------------------------------------------------------------
// checkpointing

namespace detail {
constexpr char kCheckpointMagic[4] = {'F', 'X', 'C', 'K'};
constexpr uint32_t kCheckpointVersion = 1;
}  // namespace detail

inline void save_checkpoint(TrainState& st, const std::string& path) {
    ByteWriter w;
    w.u8(static_cast<uint8_t>(st.arch.family));
    w.u32(static_cast<uint32_t>(st.arch.num_classes));
    w.u64(st.seed);
    w.u8(static_cast<uint8_t>(st.stage));
    w.i64(st.step_in_stage);
    w.i64(st.step);
    w.i64(st.refine_round);
    w.f64(st.best_metric);
    w.i64(st.best_step);
    w.str(st.rng.save_state());
    w.str(st.sampler.save_state());
    size_t vi = 0;
    for (const NetRef& net : st.models.networks()) {
        w.str(net.name);
        w.u32(static_cast<uint32_t>(net.params.size()));
        for (const Param* p : net.params) w.tensor(p->value);
        w.u32(static_cast<uint32_t>(net.stats.size()));
        for (const Tensor* s : net.stats) w.tensor(*s);
        for (size_t k = 0; k < net.params.size(); ++k) w.tensor(st.velocity[vi++]);
    }

    ByteWriter head;
    head.u32(detail::kCheckpointVersion);
    head.u64(w.bytes().size());
    ByteWriter crc;
    crc.u32(w.crc());
    std::string out(detail::kCheckpointMagic, 4);
    out += head.bytes();
    out += w.bytes();
    out += crc.bytes();
    write_file_bytes(path, out);
}

inline TrainState load_checkpoint(const std::string& path) {
    std::string bytes = read_file_bytes(path);
    if (bytes.size() < 20 || bytes.compare(0, 4, detail::kCheckpointMagic, 4) != 0)
        throw IntegrityError(path + " is not a checkpoint file");
    ByteReader head(bytes.substr(4, 12));
    const uint32_t version = head.u32();
    if (version != detail::kCheckpointVersion)
        throw IntegrityError("checkpoint version " + std::to_string(version) +
                             " is incompatible with this build (expects " +
                             std::to_string(detail::kCheckpointVersion) + ")");
    const uint64_t payload_len = head.u64();
    if (bytes.size() != 16 + payload_len + 4)
        throw IntegrityError(path + " is truncated or padded");
    const std::string payload = bytes.substr(16, payload_len);
    ByteReader crc_r(bytes.substr(16 + payload_len, 4));
    const uint32_t want_crc = crc_r.u32();
    const uint32_t got_crc = static_cast<uint32_t>(::crc32(
        0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
    if (want_crc != got_crc) throw IntegrityError(path + " failed its integrity check");

    ByteReader r(payload);
    ArchConfig arch;
    arch.family = static_cast<ArchFamily>(r.u8());
    arch.num_classes = static_cast<int>(r.u32());
    validate_arch(arch);
    const uint64_t seed = r.u64();
    TrainState st = init_train_state(arch, seed);
    st.stage = static_cast<Stage>(r.u8());
    if (static_cast<int>(st.stage) > static_cast<int>(Stage::done))
        throw IntegrityError("checkpoint carries an unknown stage tag");
    st.step_in_stage = r.i64();
    st.step = r.i64();
    st.refine_round = r.i64();
    st.best_metric = r.f64();
    st.best_step = r.i64();
    st.rng.restore_state(r.str());
    st.sampler.restore_state(r.str());
    size_t vi = 0;
    for (const NetRef& net : st.models.networks()) {
        const std::string name = r.str();
        if (name != net.name)
            throw IntegrityError("checkpoint network order mismatch: expected " + net.name +
                                 ", found " + name);
        const uint32_t n_params = r.u32();
        if (n_params != net.params.size())
            throw IntegrityError("checkpoint parameter count mismatch for " + net.name);
        for (Param* p : net.params) r.into_tensor(p->value, net.name + " parameter");
        const uint32_t n_stats = r.u32();
        if (n_stats != net.stats.size())
            throw IntegrityError("checkpoint stats count mismatch for " + net.name);
        for (Tensor* s : net.stats) r.into_tensor(*s, net.name + " statistic");
        for (size_t k = 0; k < net.params.size(); ++k)
            r.into_tensor(st.velocity[vi++], net.name + " velocity");
    }
    if (!r.exhausted()) throw IntegrityError(path + " carries trailing bytes");
    return st;
}

}  // namespace fxda
