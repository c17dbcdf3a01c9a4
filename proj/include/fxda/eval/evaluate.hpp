#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fxda/core/error.hpp"
#include "fxda/core/rng.hpp"
#include "fxda/core/tape.hpp"
#include "fxda/data/image_set.hpp"
#include "fxda/exchange/exchange.hpp"
#include "fxda/losses/losses.hpp"
#include "fxda/nn/models.hpp"

namespace fxda {

struct AccuracyReport {
    double accuracy = 0.0;
    std::vector<int> classes;       // ascending ids present in the set
    std::vector<double> per_class;  // aligned with classes
    int64_t count = 0;
};

/// Full structured result of one evaluation pass; written to the run
/// directory by write_report.
struct EvalReport {
    double target_accuracy = 0.0;
    double source_accuracy = 0.0;
    std::vector<int> classes;
    std::vector<double> per_class;  // target domain, aligned with classes
    double semantic_agreement = 0.0;
    double feedback_loss = 0.0;
    std::string config_hash;
    std::string stage;
    int64_t step = 0;
};

namespace detail {

inline std::vector<int> argmax_rows(const Tensor& m) {
    const int64_t n = m.dim(0), c = m.dim(1);
    std::vector<int> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const double* row = m.data() + i * c;
        int best = 0;
        for (int64_t j = 1; j < c; ++j)
            if (row[j] > row[best]) best = static_cast<int>(j);
        out[static_cast<size_t>(i)] = best;
    }
    return out;
}

inline std::vector<int64_t> chunk_indices(int64_t begin, int64_t end) {
    std::vector<int64_t> idx;
    idx.reserve(static_cast<size_t>(end - begin));
    for (int64_t i = begin; i < end; ++i) idx.push_back(i);
    return idx;
}

}  // namespace detail

/// Keeps only the samples whose label lies in `keep`. Used to score
/// partial-transfer runs on the target's class subset alone.
inline ImageSet filter_classes(const ImageSet& set, const std::vector<int>& keep) {
    std::vector<int64_t> rows;
    for (int64_t i = 0; i < set.count(); ++i) {
        if (std::find(keep.begin(), keep.end(), set.labels[static_cast<size_t>(i)]) !=
            keep.end())
            rows.push_back(i);
    }
    if (rows.empty()) throw ContractError("filter_classes: no samples left after filtering");
    return select_rows(set, rows);
}

/// Label accuracy of the classifier on one domain's extractor. Runs in
/// inference mode and touches no state, so repeated calls agree exactly.
inline AccuracyReport evaluate(ModelSet& m, const ImageSet& set, Domain role) {
    if (set.labels.empty() || static_cast<int64_t>(set.labels.size()) != set.count())
        throw ContractError("evaluate: dataset carries no labels");
    set.validate("evaluate");

    std::map<int, std::pair<int64_t, int64_t>> by_class;  // label -> (correct, total)
    int64_t correct = 0;
    const int64_t kChunk = 256;
    for (int64_t begin = 0; begin < set.count(); begin += kChunk) {
        const int64_t end = std::min(begin + kChunk, set.count());
        Tape t;
        NodeId x = t.leaf(gather_images(set.images, detail::chunk_indices(begin, end)));
        FeaturePair f = (role == Domain::source ? m.f_s : m.f_t).extract(t, x, false);
        NodeId probs = ops::softmax_rows(t, m.f_c.classify(t, f.common, false));
        std::vector<int> pred = detail::argmax_rows(t.val(probs));
        for (int64_t i = begin; i < end; ++i) {
            const int want = set.labels[static_cast<size_t>(i)];
            auto& cell = by_class[want];
            ++cell.second;
            if (pred[static_cast<size_t>(i - begin)] == want) {
                ++cell.first;
                ++correct;
            }
        }
    }

    AccuracyReport rep;
    rep.count = set.count();
    rep.accuracy = static_cast<double>(correct) / static_cast<double>(set.count());
    for (const auto& [cls, cell] : by_class) {
        rep.classes.push_back(cls);
        rep.per_class.push_back(static_cast<double>(cell.first) /
                                static_cast<double>(cell.second));
    }
    return rep;
}

/// Fraction of sampled cross-domain exchanges where the source image
/// discriminator assigns the synthesized image the same class the target
/// discriminator assigns the donor image. The source set supplies the
/// specific halves the synthesis borrows.
inline double semantic_agreement(ModelSet& m, const ImageSet& source_set,
                                 const ImageSet& target_set, int64_t sample_count,
                                 uint64_t seed) {
    source_set.validate("semantic_agreement(source)");
    target_set.validate("semantic_agreement(target)");
    if (sample_count < 1)
        throw ContractError("semantic_agreement: sample_count must be positive");

    Rng rng(seed);
    int64_t agree = 0;
    const int64_t kChunk = 128;
    for (int64_t done = 0; done < sample_count; done += kChunk) {
        const int64_t n = std::min(kChunk, sample_count - done);
        std::vector<int64_t> src_rows, tgt_rows;
        for (int64_t i = 0; i < n; ++i) {
            src_rows.push_back(rng.below(source_set.count()));
            tgt_rows.push_back(rng.below(target_set.count()));
        }
        Tape t;
        NodeId xs = t.leaf(gather_images(source_set.images, src_rows));
        NodeId xt = t.leaf(gather_images(target_set.images, tgt_rows));
        FeaturePair fs = m.f_s.extract(t, xs, false);
        FeaturePair ft = m.f_t.extract(t, xt, false);
        NodeId mixed = m.g_s.generate(t, fs.specific, ft.common, false);
        std::vector<int> on_mixed =
            detail::argmax_rows(t.val(m.d_s.discriminate(t, mixed, false).class_logits));
        std::vector<int> on_real =
            detail::argmax_rows(t.val(m.d_t.discriminate(t, xt, false).class_logits));
        for (int64_t i = 0; i < n; ++i)
            if (on_mixed[static_cast<size_t>(i)] == on_real[static_cast<size_t>(i)]) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(sample_count);
}

/// Mean feedback loss over seeded exchange batches; a forward-only probe of
/// how well re-extraction recovers the exchanged feature halves.
inline double feedback_probe(ModelSet& m, const ImageSet& source_set,
                             const ImageSet& target_set, int64_t sample_count,
                             uint64_t seed) {
    source_set.validate("feedback_probe(source)");
    target_set.validate("feedback_probe(target)");
    if (sample_count < 1) throw ContractError("feedback_probe: sample_count must be positive");

    Rng rng(seed);
    double total = 0.0;
    int64_t chunks = 0;
    const int64_t kChunk = 64;
    for (int64_t done = 0; done < sample_count; done += kChunk) {
        const int64_t n = std::min(kChunk, sample_count - done);
        std::vector<int64_t> src_rows, tgt_rows;
        std::vector<int> labels;
        for (int64_t i = 0; i < n; ++i) {
            src_rows.push_back(rng.below(source_set.count()));
            tgt_rows.push_back(rng.below(target_set.count()));
            labels.push_back(source_set.labels[static_cast<size_t>(src_rows.back())]);
        }
        Tape t;
        NodeId xs = t.leaf(gather_images(source_set.images, src_rows));
        NodeId xt = t.leaf(gather_images(target_set.images, tgt_rows));
        FeaturePair fs = m.f_s.extract(t, xs, false);
        FeaturePair ft = m.f_t.extract(t, xt, false);
        ExchangeResult ex = exchange(t, fs, labels, ft, rng.next_u64());
        FeaturePair back_s = feedback_cycle(t, m, ex.for_g_s, false);
        FeaturePair back_t = feedback_cycle(t, m, ex.for_g_t, false);
        NodeId fb_s = losses::feedback(t, ex.for_g_s.specific, ex.for_g_s.common,
                                       back_s.specific, back_s.common, "feedback_src");
        NodeId fb_t = losses::feedback(t, ex.for_g_t.specific, ex.for_g_t.common,
                                       back_t.specific, back_t.common, "feedback_tgt");
        total += t.scalar(fb_s) + t.scalar(fb_t);
        ++chunks;
    }
    return total / static_cast<double>(chunks);
}

}  // namespace fxda
