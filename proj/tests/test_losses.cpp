#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "fxda/losses/losses.hpp"
#include "support/gradsuite.hpp"
#include "support/oracles.hpp"

using namespace fxda;

namespace {

constexpr double kTwoLn2 = 2.0 * 0.693147180559945309417232121458;
constexpr double kLn10 = 2.302585092994045684017991454684;

Tensor matrix(const std::vector<std::vector<double>>& rows) {
    const int64_t n = static_cast<int64_t>(rows.size());
    const int64_t c = static_cast<int64_t>(rows[0].size());
    Tensor m({n, c});
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = 0; j < c; ++j) m.data()[i * c + j] = rows[i][j];
    }
    return m;
}

DiscOut fake_disc(Tape& t, const std::vector<std::vector<double>>& cls,
                  const std::vector<double>& type_logits) {
    Tensor ty({static_cast<int64_t>(type_logits.size()), 1});
    for (size_t i = 0; i < type_logits.size(); ++i) ty.data()[i] = type_logits[i];
    return {t.leaf(matrix(cls)), t.leaf(ty)};
}

std::vector<std::vector<double>> random_rows(int n, int c, uint64_t seed, double scale = 2.0) {
    Rng r(seed);
    std::vector<std::vector<double>> rows(n, std::vector<double>(c));
    for (auto& row : rows) {
        for (double& v : row) v = scale * (r.uniform() - 0.5);
    }
    return rows;
}

std::vector<double> random_flat(int n, uint64_t seed, double scale = 2.0) {
    Rng r(seed);
    std::vector<double> v(n);
    for (double& x : v) x = scale * (r.uniform() - 0.5);
    return v;
}

}  // namespace

TEST_CASE("adversarial feature terms match their closed forms") {
    Tape t;
    DiscOut on_cs = fake_disc(t, {{50, 0, 0}, {0, 50, 0}}, {0.0, 0.0});
    DiscOut on_ct = fake_disc(t, {{0, 0, 0}, {0, 0, 0}}, {0.0, 0.0});
    losses::AdvTerms a = losses::adv_fea(t, on_cs, on_ct, {0, 1});
    REQUIRE(t.scalar(a.type_term) == Catch::Approx(kTwoLn2).epsilon(0).margin(1e-12));
    REQUIRE(t.scalar(a.cls_term) == Catch::Approx(0.0).epsilon(0).margin(1e-9));

    NodeId gen = losses::adv_fea_gen_type(t, on_cs, on_ct);
    REQUIRE(t.scalar(gen) == Catch::Approx(kTwoLn2).epsilon(0).margin(1e-12));
}

TEST_CASE("adversarial feature terms match an independent oracle") {
    Tape t;
    auto cls_s = random_rows(4, 5, 1);
    auto type_s = random_flat(4, 2);
    auto type_t = random_flat(4, 3);
    DiscOut on_cs = fake_disc(t, cls_s, type_s);
    DiscOut on_ct = fake_disc(t, random_rows(4, 5, 4), type_t);
    std::vector<int> y{3, 0, 4, 2};
    losses::AdvTerms a = losses::adv_fea(t, on_cs, on_ct, y);
    double want_type = oracles::bce_mean(type_s, 1.0) + oracles::bce_mean(type_t, 0.0);
    double want_cls = oracles::xent_mean(cls_s, y);
    REQUIRE(t.scalar(a.type_term) == Catch::Approx(want_type).epsilon(0).margin(1e-10));
    REQUIRE(t.scalar(a.cls_term) == Catch::Approx(want_cls).epsilon(0).margin(1e-10));

    NodeId gen = losses::adv_fea_gen_type(t, on_cs, on_ct);
    double want_gen = oracles::bce_mean(type_s, 0.0) + oracles::bce_mean(type_t, 1.0);
    REQUIRE(t.scalar(gen) == Catch::Approx(want_gen).epsilon(0).margin(1e-10));
}

TEST_CASE("image adversarial terms cover both domains") {
    Tape t;
    DiscOut real = fake_disc(t, {{9, 0}, {0, 9}}, {0.0, 0.0});
    DiscOut fake = fake_disc(t, {{5, -5}, {-5, 5}}, {0.0, 0.0});
    losses::AdvTerms src = losses::adv_img_source(t, real, fake, {0, 1});
    REQUIRE(t.scalar(src.type_term) == Catch::Approx(kTwoLn2).epsilon(0).margin(1e-12));
    REQUIRE(t.scalar(src.cls_term) ==
            Catch::Approx(oracles::xent_mean({{9, 0}, {0, 9}}, {0, 1})).epsilon(0).margin(1e-10));

    losses::AdvTerms tgt = losses::adv_img_target(t, real, fake, {0, 1});
    REQUIRE(t.scalar(tgt.type_term) == Catch::Approx(kTwoLn2).epsilon(0).margin(1e-12));
    REQUIRE(t.scalar(tgt.cls_term) ==
            Catch::Approx(oracles::xent_mean({{5, -5}, {-5, 5}}, {0, 1})).epsilon(0).margin(1e-10));

    REQUIRE_THROWS_AS(losses::adv_img_target(t, real, fake, {0, 1, 2}), ContractError);

    NodeId gen = losses::adv_img_gen_type(t, fake, "adv_img_src_type");
    REQUIRE(t.scalar(gen) == Catch::Approx(kTwoLn2 / 2.0).epsilon(0).margin(1e-12));
}

TEST_CASE("random image adversarial fixture matches the oracle") {
    Tape t;
    auto real_cls = random_rows(4, 6, 11);
    auto fake_cls = random_rows(4, 6, 12);
    auto real_type = random_flat(4, 13);
    auto fake_type = random_flat(4, 14);
    DiscOut real = fake_disc(t, real_cls, real_type);
    DiscOut fake = fake_disc(t, fake_cls, fake_type);
    std::vector<int> y{5, 2, 0, 3};
    losses::AdvTerms src = losses::adv_img_source(t, real, fake, y);
    losses::AdvTerms tgt = losses::adv_img_target(t, real, fake, y);
    double want_type = oracles::bce_mean(real_type, 1.0) + oracles::bce_mean(fake_type, 0.0);
    REQUIRE(t.scalar(src.type_term) == Catch::Approx(want_type).epsilon(0).margin(1e-10));
    REQUIRE(t.scalar(src.cls_term) ==
            Catch::Approx(oracles::xent_mean(real_cls, y)).epsilon(0).margin(1e-10));
    REQUIRE(t.scalar(tgt.cls_term) ==
            Catch::Approx(oracles::xent_mean(fake_cls, y)).epsilon(0).margin(1e-10));
}

TEST_CASE("reconstruction uses the mean-per-pixel convention") {
    Tape t;
    NodeId ones = t.leaf(Tensor::full({2, 3, 3, 1}, 1.0));
    NodeId zeros = t.leaf(Tensor::zeros({2, 3, 3, 1}));
    REQUIRE(t.scalar(losses::reconstruction_single(t, ones, zeros)) == 1.0);
    REQUIRE(t.scalar(losses::reconstruction_single(t, ones, ones)) == 0.0);
    REQUIRE(t.scalar(losses::reconstruction(t, ones, zeros, ones, ones)) == 1.0);
    REQUIRE(t.scalar(losses::reconstruction(t, ones, zeros, ones, zeros)) == 2.0);

    Rng r(5);
    Tensor a({2, 2, 2, 1}), b({2, 2, 2, 1});
    std::vector<double> av, bv;
    for (int64_t i = 0; i < 8; ++i) {
        a.data()[i] = r.uniform();
        b.data()[i] = r.uniform();
        av.push_back(a.data()[i]);
        bv.push_back(b.data()[i]);
    }
    NodeId got = losses::reconstruction_single(t, t.leaf(a), t.leaf(b));
    REQUIRE(t.scalar(got) == Catch::Approx(oracles::mse_mean(av, bv)).epsilon(0).margin(1e-10));
}

TEST_CASE("feedback distance averages each part over its elements") {
    Tape t;
    Tensor s({1, 4});
    s.data()[2] = 1.0;  // unit offset in one coordinate
    NodeId orig = t.leaf(Tensor::zeros({1, 4}));
    NodeId re = t.leaf(s);
    NodeId same = t.leaf(Tensor::zeros({1, 4}));
    REQUIRE(t.scalar(losses::feedback(t, orig, same, re, same)) == 0.25);
    REQUIRE(t.scalar(losses::feedback(t, orig, same, orig, same)) == 0.0);

    auto sv = random_flat(8, 21), cv = random_flat(8, 22);
    auto sv2 = random_flat(8, 23), cv2 = random_flat(8, 24);
    NodeId a = t.leaf(Tensor({2, 4}, sv));
    NodeId b = t.leaf(Tensor({2, 4}, cv));
    NodeId a2 = t.leaf(Tensor({2, 4}, sv2));
    NodeId b2 = t.leaf(Tensor({2, 4}, cv2));
    double want = oracles::mse_mean(sv, sv2) + oracles::mse_mean(cv, cv2);
    REQUIRE(t.scalar(losses::feedback(t, a, b, a2, b2)) ==
            Catch::Approx(want).epsilon(0).margin(1e-10));
}

TEST_CASE("semantic consistency pairs rows through the donor map") {
    Tape t;
    std::vector<std::vector<double>> onehot(1, std::vector<double>(10, 0.0));
    onehot[0][0] = 1.0;
    std::vector<std::vector<double>> uniform(1, std::vector<double>(10, 0.1));
    NodeId p_real = t.leaf(matrix(onehot));
    NodeId p_mixed = t.leaf(matrix(uniform));
    NodeId sem = losses::semantic_consistency(t, p_real, p_mixed, {0});
    REQUIRE(t.scalar(sem) == Catch::Approx(0.90).epsilon(0).margin(1e-12));
    REQUIRE(t.scalar(losses::semantic_consistency(t, p_real, p_real, {0})) == 0.0);

    // rows must be compared against their donors, not positionally
    auto real_rows = random_rows(3, 4, 31, 1.0);
    auto mixed_rows = random_rows(3, 4, 32, 1.0);
    std::vector<int64_t> donors{2, 0, 1};
    NodeId pr = t.leaf(matrix(real_rows));
    NodeId pm = t.leaf(matrix(mixed_rows));
    std::vector<std::vector<double>> aligned{real_rows[2], real_rows[0], real_rows[1]};
    double want = oracles::row_sse_mean(aligned, mixed_rows);
    REQUIRE(t.scalar(losses::semantic_consistency(t, pr, pm, donors)) ==
            Catch::Approx(want).epsilon(0).margin(1e-10));
    REQUIRE_THROWS_AS(losses::semantic_consistency(t, pr, pm, {0, 1}), ContractError);
}

TEST_CASE("entropy matches closed forms and stays within bounds") {
    Tape t;
    std::vector<std::vector<double>> uniform(3, std::vector<double>(10, 0.1));
    REQUIRE(t.scalar(losses::entropy_term(t, t.leaf(matrix(uniform)))) ==
            Catch::Approx(kLn10).epsilon(0).margin(1e-12));

    std::vector<std::vector<double>> onehot(2, std::vector<double>(4, 0.0));
    onehot[0][1] = 1.0;
    onehot[1][3] = 1.0;
    REQUIRE(t.scalar(losses::entropy_term(t, t.leaf(matrix(onehot)))) == 0.0);

    std::vector<std::vector<double>> half{{0.5, 0.5, 0.0, 0.0}};
    REQUIRE(t.scalar(losses::entropy_term(t, t.leaf(matrix(half)))) ==
            Catch::Approx(std::log(2.0)).epsilon(0).margin(1e-12));

    // permutation invariance and the ln N_C ceiling
    auto logits = random_rows(5, 7, 41);
    NodeId probs = ops::softmax_rows(t, t.leaf(matrix(logits)));
    double base = t.scalar(losses::entropy_term(t, probs));
    REQUIRE(base > 0.0);
    REQUIRE(base <= std::log(7.0) + 1e-12);
    for (auto& row : logits) std::swap(row[0], row[5]);
    NodeId probs_perm = ops::softmax_rows(t, t.leaf(matrix(logits)));
    REQUIRE(t.scalar(losses::entropy_term(t, probs_perm)) ==
            Catch::Approx(base).epsilon(0).margin(1e-12));
}

TEST_CASE("entropy penalty sums its three parts") {
    Tape t;
    std::vector<std::vector<double>> uniform(2, std::vector<double>(10, 0.1));
    NodeId u = t.leaf(matrix(uniform));
    REQUIRE(t.scalar(losses::entropy_loss(t, u, u, u)) ==
            Catch::Approx(3 * kLn10).epsilon(0).margin(1e-12));

    std::vector<std::vector<double>> onehot(2, std::vector<double>(10, 0.0));
    onehot[0][0] = onehot[1][9] = 1.0;
    NodeId o = t.leaf(matrix(onehot));
    REQUIRE(t.scalar(losses::entropy_loss(t, o, o, o)) == 0.0);

    auto r1 = random_rows(4, 6, 51), r2 = random_rows(4, 6, 52), r3 = random_rows(4, 6, 53);
    NodeId p1 = ops::softmax_rows(t, t.leaf(matrix(r1)));
    NodeId p2 = ops::softmax_rows(t, t.leaf(matrix(r2)));
    NodeId p3 = ops::softmax_rows(t, t.leaf(matrix(r3)));
    std::vector<std::vector<double>> q1, q2, q3;
    for (auto& r : r1) q1.push_back(oracles::softmax_row(r));
    for (auto& r : r2) q2.push_back(oracles::softmax_row(r));
    for (auto& r : r3) q3.push_back(oracles::softmax_row(r));
    double want =
        oracles::entropy_mean(q1) + oracles::entropy_mean(q2) + oracles::entropy_mean(q3);
    REQUIRE(t.scalar(losses::entropy_loss(t, p1, p2, p3)) ==
            Catch::Approx(want).epsilon(0).margin(1e-10));
}

TEST_CASE("classification matches the cross-entropy oracle") {
    Tape t;
    std::vector<std::vector<double>> uniform(3, std::vector<double>(10, 0.7));
    REQUIRE(t.scalar(losses::classification(t, t.leaf(matrix(uniform)), {0, 5, 9})) ==
            Catch::Approx(kLn10).epsilon(0).margin(1e-12));

    auto logits = random_rows(4, 10, 61);
    std::vector<int> y{9, 0, 4, 7};
    REQUIRE(t.scalar(losses::classification(t, t.leaf(matrix(logits)), y)) ==
            Catch::Approx(oracles::xent_mean(logits, y)).epsilon(0).margin(1e-10));
}

TEST_CASE("non-finite activations raise a numeric error naming the term") {
    Tape t;
    std::vector<std::vector<double>> cls{{0.0, 0.0}, {0.0, 0.0}};
    DiscOut bad = fake_disc(t, cls, {std::numeric_limits<double>::quiet_NaN(), 0.0});
    DiscOut good = fake_disc(t, cls, {0.0, 0.0});
    try {
        losses::adv_fea(t, bad, good, {0, 1});
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        REQUIRE(std::string(e.what()).find("adv_fea_type") != std::string::npos);
    }
}

TEST_CASE("generator objective rewards fooling the discriminator") {
    Tape t;
    double prev = 1e100;
    for (double z : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
        Tensor logit({1, 1});
        logit.data()[0] = z;
        DiscOut out{t.leaf(Tensor::zeros({1, 2})), t.leaf(logit)};
        double v = t.scalar(losses::adv_img_gen_type(t, out, "adv_img_tgt_type"));
        REQUIRE(v < prev);
        prev = v;
    }
}

TEST_CASE("weighted totals respect role, flags and weights") {
    LossReport r;
    r.adv_fea_type = 0.1;
    r.adv_fea_cls = 0.2;
    r.adv_img_src_type = 0.3;
    r.adv_img_src_cls = 0.4;
    r.adv_img_tgt_type = 0.5;
    r.adv_img_tgt_cls = 0.6;
    r.recon = 0.7;
    r.feedback_src = 0.8;
    r.feedback_tgt = 0.9;
    r.semantic = 1.1;
    r.entropy = 1.2;
    r.cls = 1.3;

    LossWeights zero;
    zero.adv_fea = zero.adv_img = zero.recon = zero.cls = 0;
    zero.sem = zero.feedback = zero.entropy = 0;
    REQUIRE(total(r, zero, Role::generator_extractor) == 0.0);
    REQUIRE(total(r, zero, Role::discriminator) == 0.0);

    LossWeights only_cls = zero;
    only_cls.cls = 1.0;
    REQUIRE(total(r, only_cls, Role::generator_extractor) == 1.3);
    REQUIRE(total(r, only_cls, Role::discriminator) == 0.0);

    LossWeights w;  // defaults: adv 1, recon 1, cls 10, sem 1, feedback 1, entropy 0.1
    double adv = (0.1 + 0.2) + (0.3 + 0.4 + 0.5 + 0.6);
    double want_gen = adv + 0.7 + (0.8 + 0.9) + 1.1 + 0.1 * 1.2 + 10 * 1.3;
    REQUIRE(total(r, w, Role::generator_extractor) == Catch::Approx(want_gen).margin(1e-12));
    REQUIRE(total(r, w, Role::discriminator) == Catch::Approx(adv + 0.1 * 1.2).margin(1e-12));

    LossWeights ablated = w;
    ablated.enable_sem = false;
    ablated.enable_feedback = false;
    ablated.enable_entropy = false;
    REQUIRE(total(r, ablated, Role::generator_extractor) ==
            Catch::Approx(adv + 0.7 + 10 * 1.3).margin(1e-12));

    LossWeights negative = w;
    negative.sem = -1.0;
    REQUIRE_THROWS_AS(total(r, negative, Role::generator_extractor), ConfigError);

    r.semantic = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(r.check_finite(), NumericError);
}

TEST_CASE("finite differences confirm every loss gradient") {
    auto items = testsupport::run_gradient_suite(4);
    REQUIRE(items.size() == 10);
    for (const auto& item : items) {
        INFO(item.name << ": max rel err " << item.max_rel_err << " over " << item.checked
                       << " entries, " << item.skipped << " kink-straddled");
        REQUIRE(item.checked > 0);
        REQUIRE(item.max_rel_err <= 1e-4);
        // non-smooth windows must stay the rare exception
        REQUIRE(item.skipped * 4 <= item.checked);
    }
}
