#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fxda/nn/models.hpp"

// Cross-domain feature exchange: pair each sample's own specific part with a
// randomly drawn common part from the opposing batch, synthesize through the
// matching generator, and optionally cycle back through the extractor.

namespace fxda {

enum class Direction { target_to_source_style, source_to_target_style };
enum class Part { common, specific };

struct MixedPair {
    Domain specific_from = Domain::source;
    Domain common_from = Domain::target;
    int64_t donor_source = -1;          // index into the source batch
    int64_t donor_target = -1;          // index into the target batch
    std::optional<int> borrowed_label;  // present iff common_from == source

    void validate() const {
        if (specific_from == common_from) {
            throw ContractError("MixedPair: both parts drawn from " + domain_name(common_from));
        }
        if ((common_from == Domain::source) != borrowed_label.has_value()) {
            throw ContractError("MixedPair: borrowed label must accompany a source common part");
        }
    }
};

/// One direction's worth of exchanged features, gathered into batch tensors.
/// Row i keeps sample i's own specific part; its common part comes from the
/// opposing batch row donor_of_row[i].
struct MixedBatch {
    Domain specific_from = Domain::source;
    Domain common_from = Domain::target;
    NodeId specific = -1;
    NodeId common = -1;
    std::vector<int64_t> donor_of_row;
    std::vector<MixedPair> pairs;
    std::vector<int> borrowed_labels;  // filled iff common_from == source

    void validate() const {
        for (const MixedPair& p : pairs) p.validate();
    }
};

struct ExchangeResult {
    MixedBatch for_g_s;  // (S_S, C_T)
    MixedBatch for_g_t;  // (S_T, C_S), carrying borrowed source labels
};

inline ExchangeResult exchange(Tape& t, const FeaturePair& bundle_s,
                               const std::vector<int>& source_labels,
                               const FeaturePair& bundle_t, uint64_t pairing_seed) {
    const int64_t ns = t.val(bundle_s.specific).dim(0);
    const int64_t nt = t.val(bundle_t.specific).dim(0);
    if (ns != nt) {
        throw ContractError("exchange: batch mismatch " + std::to_string(ns) + " vs " +
                            std::to_string(nt));
    }
    if (static_cast<int64_t>(source_labels.size()) != ns) {
        throw ContractError("exchange: source labels do not cover the batch");
    }
    Rng root(pairing_seed);
    Rng rs = root.fork(0), rt = root.fork(1);
    std::vector<int64_t> perm_t = rs.permutation(nt);  // target donors for G_S rows
    std::vector<int64_t> perm_s = rt.permutation(ns);  // source donors for G_T rows

    ExchangeResult out;
    out.for_g_s.specific_from = Domain::source;
    out.for_g_s.common_from = Domain::target;
    out.for_g_s.specific = bundle_s.specific;
    out.for_g_s.common = ops::gather_rows(t, bundle_t.common, perm_t);
    out.for_g_s.donor_of_row = perm_t;
    for (int64_t i = 0; i < ns; ++i) {
        MixedPair p;
        p.specific_from = Domain::source;
        p.common_from = Domain::target;
        p.donor_source = i;
        p.donor_target = perm_t[i];
        out.for_g_s.pairs.push_back(p);
    }

    out.for_g_t.specific_from = Domain::target;
    out.for_g_t.common_from = Domain::source;
    out.for_g_t.specific = bundle_t.specific;
    out.for_g_t.common = ops::gather_rows(t, bundle_s.common, perm_s);
    out.for_g_t.donor_of_row = perm_s;
    for (int64_t j = 0; j < nt; ++j) {
        MixedPair p;
        p.specific_from = Domain::target;
        p.common_from = Domain::source;
        p.donor_source = perm_s[j];
        p.donor_target = j;
        p.borrowed_label = source_labels[perm_s[j]];
        out.for_g_t.pairs.push_back(p);
        out.for_g_t.borrowed_labels.push_back(source_labels[perm_s[j]]);
    }

    out.for_g_s.validate();
    out.for_g_t.validate();
    return out;
}

/// Renders one direction's mixed features through its generator.
inline NodeId generate_mixed(Tape& t, ModelSet& m, const MixedBatch& mixed, bool training) {
    Generator& g = mixed.common_from == Domain::target ? m.g_s : m.g_t;
    return g.generate(t, mixed.specific, mixed.common, training);
}

/// Full style-transfer pass over raw image batches. Returns the synthesized
/// batch for the requested direction.
inline Tensor style_transfer(ModelSet& m, Direction direction, const Tensor& source_images,
                             const Tensor& target_images, uint64_t pairing_seed) {
    Tape t;
    NodeId xs = t.leaf(source_images);
    NodeId xt = t.leaf(target_images);
    FeaturePair fs = m.f_s.extract(t, xs, false);
    FeaturePair ft = m.f_t.extract(t, xt, false);
    std::vector<int> dummy_labels(t.val(fs.specific).dim(0), 0);
    ExchangeResult ex = exchange(t, fs, dummy_labels, ft, pairing_seed);
    const MixedBatch& mixed =
        direction == Direction::target_to_source_style ? ex.for_g_s : ex.for_g_t;
    NodeId img = generate_mixed(t, m, mixed, false);
    return t.val(img).clone();
}

/// Generates from a mixed pair and re-extracts with the generator-side
/// extractor, yielding the bundle the feedback terms compare against.
inline FeaturePair feedback_cycle(Tape& t, ModelSet& m, const MixedBatch& mixed, bool training) {
    NodeId img = generate_mixed(t, m, mixed, training);
    Extractor& f = mixed.common_from == Domain::target ? m.f_s : m.f_t;
    return f.extract(t, img, training);
}

/// Regenerates images from one retained part, zeroing the other.
inline Tensor visualize_part(ModelSet& m, const Tensor& images, Domain side, Part keep) {
    Tape t;
    NodeId x = t.leaf(images);
    Extractor& f = side == Domain::source ? m.f_s : m.f_t;
    Generator& g = side == Domain::source ? m.g_s : m.g_t;
    FeaturePair fp = f.extract(t, x, false);
    const int64_t n = t.val(fp.specific).dim(0);
    NodeId zero = t.leaf(Tensor::zeros({n, m.arch.part_dim()}));
    NodeId img = keep == Part::common ? g.generate(t, zero, fp.common, false)
                                      : g.generate(t, fp.specific, zero, false);
    return t.val(img).clone();
}

}  // namespace fxda
