#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fxda/core/ops.hpp"
#include "fxda/nn/models.hpp"

// Loss terms as pure tape functions of network outputs. Every term reduces to
// a per-sample mean (pixels and feature dimensions averaged, probability rows
// summed) so weights stay batch-size-invariant. The canonical term values use
// the true-label orientation; generator-side variants use inverted labels in
// the non-saturating form.

namespace fxda {

enum class Role { discriminator, generator_extractor };

struct LossWeights {
    double adv_fea = 1.0;
    double adv_img = 1.0;
    double recon = 1.0;
    double cls = 10.0;
    double sem = 1.0;
    double feedback = 1.0;
    double entropy = 0.1;
    bool enable_sem = true;
    bool enable_feedback = true;
    bool enable_entropy = true;

    void validate() const {
        for (double w : {adv_fea, adv_img, recon, cls, sem, feedback, entropy}) {
            if (w < 0) throw ConfigError("loss weights must be non-negative");
            if (!std::isfinite(w)) throw ConfigError("loss weights must be finite");
        }
    }
};

struct LossReport {
    double adv_fea_type = 0, adv_fea_cls = 0;
    double adv_img_src_type = 0, adv_img_src_cls = 0;
    double adv_img_tgt_type = 0, adv_img_tgt_cls = 0;
    double recon = 0;
    double feedback_src = 0, feedback_tgt = 0;
    double semantic = 0;
    double entropy = 0;
    double cls = 0;
    LossWeights weights;
    double total = 0;

    static const std::vector<std::string>& field_names() {
        static const std::vector<std::string> names = {
            "adv_fea_type", "adv_fea_cls",  "adv_img_src_type", "adv_img_src_cls",
            "adv_img_tgt_type", "adv_img_tgt_cls", "recon", "feedback_src",
            "feedback_tgt", "semantic", "entropy", "cls"};
        return names;
    }

    std::vector<double> values() const {
        return {adv_fea_type, adv_fea_cls,  adv_img_src_type, adv_img_src_cls,
                adv_img_tgt_type, adv_img_tgt_cls, recon, feedback_src,
                feedback_tgt, semantic, entropy, cls};
    }

    void check_finite() const {
        const auto& names = field_names();
        std::vector<double> vals = values();
        for (size_t i = 0; i < vals.size(); ++i) {
            if (!std::isfinite(vals[i])) {
                throw NumericError("loss term " + names[i] + " is non-finite");
            }
        }
        if (!std::isfinite(total)) throw NumericError("loss total is non-finite");
    }
};

namespace losses {

namespace detail {

inline NodeId checked(Tape& t, NodeId id, const char* term) {
    if (!t.val(id).all_finite()) {
        throw NumericError(std::string("loss term ") + term + " is non-finite");
    }
    return id;
}

}  // namespace detail

struct AdvTerms {
    NodeId type_term;
    NodeId cls_term;
};

/// Feature-level adversarial pair: source commons labeled real (1), target
/// commons fake (0); class term reads the source commons only.
inline AdvTerms adv_fea(Tape& t, const DiscOut& on_cs, const DiscOut& on_ct,
                        const std::vector<int>& y_s) {
    NodeId type_term = ops::add(t, ops::bce_logit_mean(t, on_cs.type_logit, 1.0),
                                ops::bce_logit_mean(t, on_ct.type_logit, 0.0));
    NodeId cls_term = ops::softmax_xent_mean(t, on_cs.class_logits, y_s);
    return {detail::checked(t, type_term, "adv_fea_type"),
            detail::checked(t, cls_term, "adv_fea_cls")};
}

/// Extractor-side feature game, inverted labels on both domains.
inline NodeId adv_fea_gen_type(Tape& t, const DiscOut& on_cs, const DiscOut& on_ct) {
    NodeId term = ops::add(t, ops::bce_logit_mean(t, on_cs.type_logit, 0.0),
                           ops::bce_logit_mean(t, on_ct.type_logit, 1.0));
    return detail::checked(t, term, "adv_fea_type");
}

/// Source-domain image game: real images → 1, synthesized → 0; the class
/// term reads real labeled source images only.
inline AdvTerms adv_img_source(Tape& t, const DiscOut& on_real, const DiscOut& on_fake,
                               const std::vector<int>& y_s) {
    NodeId type_term = ops::add(t, ops::bce_logit_mean(t, on_real.type_logit, 1.0),
                                ops::bce_logit_mean(t, on_fake.type_logit, 0.0));
    NodeId cls_term = ops::softmax_xent_mean(t, on_real.class_logits, y_s);
    return {detail::checked(t, type_term, "adv_img_src_type"),
            detail::checked(t, cls_term, "adv_img_src_cls")};
}

/// Target-domain image game: the class term reads synthesized images under
/// labels borrowed from the source donor of each common part.
inline AdvTerms adv_img_target(Tape& t, const DiscOut& on_real, const DiscOut& on_fake,
                               const std::vector<int>& borrowed_labels) {
    if (static_cast<int64_t>(borrowed_labels.size()) != t.val(on_fake.class_logits).dim(0)) {
        throw ContractError("adv_img_target: borrowed labels do not pair with generated batch");
    }
    NodeId type_term = ops::add(t, ops::bce_logit_mean(t, on_real.type_logit, 1.0),
                                ops::bce_logit_mean(t, on_fake.type_logit, 0.0));
    NodeId cls_term = ops::softmax_xent_mean(t, on_fake.class_logits, borrowed_labels);
    return {detail::checked(t, type_term, "adv_img_tgt_type"),
            detail::checked(t, cls_term, "adv_img_tgt_cls")};
}

/// Generator-side image game: only the synthesized half, labels inverted.
inline NodeId adv_img_gen_type(Tape& t, const DiscOut& on_fake, const char* term) {
    return detail::checked(t, ops::bce_logit_mean(t, on_fake.type_logit, 1.0), term);
}

/// Mean-per-pixel squared reconstruction error, both domains summed.
inline NodeId reconstruction(Tape& t, NodeId x_s, NodeId x_s_hat, NodeId x_t, NodeId x_t_hat) {
    NodeId term =
        ops::add(t, ops::mse_mean(t, x_s_hat, x_s), ops::mse_mean(t, x_t_hat, x_t));
    return detail::checked(t, term, "recon");
}

/// One domain's reconstruction alone (the pretraining stages use this form).
inline NodeId reconstruction_single(Tape& t, NodeId x, NodeId x_hat) {
    return detail::checked(t, ops::mse_mean(t, x_hat, x), "recon");
}

/// Feedback consistency: re-extracted parts against the parts fed in.
inline NodeId feedback(Tape& t, NodeId s, NodeId c, NodeId s_re, NodeId c_re,
                       const char* term = "feedback") {
    NodeId out = ops::add(t, ops::mse_mean(t, s_re, s), ops::mse_mean(t, c_re, c));
    return detail::checked(t, out, term);
}

/// Squared distance between class-probability rows, each synthesized row
/// paired with the real target sample that donated its common part.
inline NodeId semantic_consistency(Tape& t, NodeId probs_t_real, NodeId probs_mixed,
                                   const std::vector<int64_t>& donor_of_row) {
    if (static_cast<int64_t>(donor_of_row.size()) != t.val(probs_mixed).dim(0)) {
        throw ContractError("semantic_consistency: donor map does not cover the batch");
    }
    NodeId aligned = ops::gather_rows(t, probs_t_real, donor_of_row);
    return detail::checked(t, ops::row_sse_mean(t, aligned, probs_mixed), "semantic");
}

/// Mean Shannon entropy of probability rows.
inline NodeId entropy_term(Tape& t, NodeId probs) {
    return detail::checked(t, ops::entropy_probs_mean(t, probs), "entropy");
}

/// The three-part entropy penalty over synthesized-source, real-target and
/// target-common class distributions.
inline NodeId entropy_loss(Tape& t, NodeId probs_ds_mixed, NodeId probs_dt_real,
                           NodeId probs_df_ct) {
    NodeId sum = ops::add(t, ops::entropy_probs_mean(t, probs_ds_mixed),
                          ops::entropy_probs_mean(t, probs_dt_real));
    sum = ops::add(t, sum, ops::entropy_probs_mean(t, probs_df_ct));
    return detail::checked(t, sum, "entropy");
}

/// Softmax cross-entropy of the classifier on labeled source commons.
inline NodeId classification(Tape& t, NodeId logits, const std::vector<int>& y_s) {
    return detail::checked(t, ops::softmax_xent_mean(t, logits, y_s), "cls");
}

}  // namespace losses

/// Weighted sum of the enabled terms a role trains on. The discriminator side
/// sees the adversarial and entropy terms; the generator/extractor side sees
/// everything enabled.
inline double total(const LossReport& r, const LossWeights& w, Role role) {
    w.validate();
    double sum = w.adv_fea * (r.adv_fea_type + r.adv_fea_cls) +
                 w.adv_img * (r.adv_img_src_type + r.adv_img_src_cls + r.adv_img_tgt_type +
                              r.adv_img_tgt_cls);
    if (w.enable_entropy) sum += w.entropy * r.entropy;
    if (role == Role::discriminator) return sum;
    sum += w.recon * r.recon + w.cls * r.cls;
    if (w.enable_feedback) sum += w.feedback * (r.feedback_src + r.feedback_tgt);
    if (w.enable_sem) sum += w.sem * r.semantic;
    return sum;
}

}  // namespace fxda
