#include "gradcheck.hpp"

#include "eglom/net/model.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

using namespace eglom;
using namespace eglom::net;
using ad::Tensor;

namespace {

HyperParams tiny_hp(std::size_t iterations = 3) {
    HyperParams hp;
    hp.embedding_dim = 8;
    hp.decoder_dim = 8;
    hp.iterations = iterations;
    hp.posenc_frequencies = 2;
    hp.symbol_decoder_hidden = {6, 4};
    return hp;
}

world::Scene scene_with(std::size_t locations, std::uint64_t seed) {
    Rng rng(seed);
    world::Scene s;
    s.objects.push_back({});
    s.objects[0].pose = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(0, 6), 1.0, 1.0};
    for (std::size_t i = 0; i < locations; ++i) {
        world::Location loc;
        loc.cell_x = 0.05 * double(i) - 0.3;
        loc.cell_y = 0.1 - 0.05 * double(i % 3);
        loc.input = {rng.uniform(0.05, 0.2), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                     rng.uniform(0.05, 0.2), loc.cell_x + 0.01, loc.cell_y - 0.01};
        loc.truth = loc.input;
        loc.part = int(i);
        s.locations.push_back(loc);
    }
    return s;
}

world::Scene random_scene(world::Task task, std::uint64_t seed) {
    world::DatasetSpec spec;
    spec.task = task;
    spec.count = 1;
    spec.seed = seed;
    return world::generate_dataset(spec).scenes[0];
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

std::size_t mlp_count(std::vector<std::size_t> widths) {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) n += widths[i] * widths[i + 1] + widths[i + 1];
    return n;
}

}  // namespace

TEST_SUITE("net") {

TEST_CASE("position encoding examples") {
    const auto origin = position_encoding(0, 0, 3);
    REQUIRE(origin.size() == 12);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(origin[4 * k + 0] == 0.0);
        CHECK(origin[4 * k + 1] == 1.0);
        CHECK(origin[4 * k + 2] == 0.0);
        CHECK(origin[4 * k + 3] == 1.0);
    }
    const auto half = position_encoding(0.5, 0, 2);
    CHECK(half.size() == 8);
    CHECK(half[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(half[4]) < 1e-15);          // sin(pi)
    CHECK(half[5] == doctest::Approx(-1.0));   // cos(pi)
}

TEST_CASE("batch positions come from cell centres scaled by the extent") {
    HyperParams hp;
    const world::Scene s = random_scene(world::Task::one_from_two, 4);
    const Batch b = make_batch(std::vector<world::Scene>{s}, hp);
    const auto pe = position_encoding(s.locations[2].cell_x / 1.5, s.locations[2].cell_y / 1.5, 6);
    for (std::size_t k = 0; k < pe.size(); ++k) CHECK(b.positions(2, k) == pe[k]);
    CHECK(b.offsets == std::vector<std::size_t>{0, 5});
}

TEST_CASE("attention over one location returns it") {
    const Tensor e = Tensor::from_rows({{0.3, -2.0, 5.0}});
    CHECK(attention_average(e, 3.0) == e);
}

TEST_CASE("attention over identical embeddings leaves them unchanged") {
    const Tensor e = Tensor::from_rows({{0.3, -2, 1}, {0.3, -2, 1}, {0.3, -2, 1}, {0.3, -2, 1}, {0.3, -2, 1}});
    CHECK(max_abs_diff(attention_average(e, 1.0), e) < 1e-15);
}

TEST_CASE("two-location attention matches the closed form") {
    const Tensor e = Tensor::from_rows({{1, 0}, {0, 1}});
    const Tensor w = attention_weights(e, 1.0);
    const double self = std::numbers::e / (std::numbers::e + 1.0);
    CHECK(std::abs(w(0, 0) - self) < 1e-12);
    CHECK(std::abs(w(0, 1) - (1 - self)) < 1e-12);
    CHECK(std::abs(w(0, 0) - 0.7311) < 1e-4);
    const Tensor a = attention_average(e, 1.0);
    CHECK(std::abs(a(0, 0) - self) < 1e-12);
    CHECK(std::abs(a(0, 1) - (1 - self)) < 1e-12);

    // tau scales the logits: tau = 2 gives e^2 / (e^2 + 1).
    const double e2 = std::exp(2.0);
    CHECK(std::abs(attention_weights(e, 2.0)(0, 0) - e2 / (e2 + 1)) < 1e-12);
}

TEST_CASE("attention rows sum to one and outputs lie in the convex hull") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t L = 1 + rng.index(12);
        Tensor e = Tensor::matrix(L, 7);
        for (auto& v : e.storage()) v = rng.uniform(-2, 2);
        const double tau = rng.uniform(0.1, 3.0);
        const Tensor w = attention_weights(e, tau);
        const Tensor a = attention_average(e, tau);
        for (std::size_t i = 0; i < L; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < L; ++j) {
                CHECK(w(i, j) >= 0.0);
                s += w(i, j);
            }
            CHECK(std::abs(s - 1.0) < 1e-9);
            // Convex combination: a_i = sum_j w_ij e_j with w_i a probability vector.
            for (std::size_t c = 0; c < 7; ++c) {
                double v = 0.0, lo = 1e300, hi = -1e300;
                for (std::size_t j = 0; j < L; ++j) {
                    v += w(i, j) * e(j, c);
                    lo = std::min(lo, e(j, c));
                    hi = std::max(hi, e(j, c));
                }
                CHECK(std::abs(a(i, c) - v) < 1e-12);
                CHECK(a(i, c) >= lo - 1e-12);
                CHECK(a(i, c) <= hi + 1e-12);
            }
        }
    }
}

TEST_CASE("segmented attention keeps scenes apart") {
    Rng rng(6);
    Tensor e = Tensor::matrix(7, 4);
    for (auto& v : e.storage()) v = rng.uniform(-1, 1);
    ad::Tape tape;
    const std::vector<std::size_t> offsets{0, 3, 7};
    const Tensor out = segmented_attention(tape.constant(e), offsets, 1.3).value();

    Tensor first = Tensor::matrix(3, 4), second = Tensor::matrix(4, 4);
    for (std::size_t r = 0; r < 7; ++r) {
        for (std::size_t c = 0; c < 4; ++c) (r < 3 ? first(r, c) : second(r - 3, c)) = e(r, c);
    }
    const Tensor a = attention_average(first, 1.3), b = attention_average(second, 1.3);
    for (std::size_t r = 0; r < 7; ++r) {
        for (std::size_t c = 0; c < 4; ++c) {
            CHECK(std::abs(out(r, c) - (r < 3 ? a(r, c) : b(r - 3, c))) < 1e-12);
        }
    }
    const std::vector<std::size_t> bad{0, 3, 6};
    CHECK_THROWS_AS(segmented_attention(tape.constant(e), bad, 1.0), ad::DimensionError);
    CHECK_THROWS_AS(attention_average(Tensor::matrix(0, 4), 1.0), ad::ContractError);
}

TEST_CASE("segmented attention gradient matches central differences") {
    Rng rng(7);
    Tensor e = Tensor::matrix(6, 3);
    for (auto& v : e.storage()) v = rng.uniform(-1, 1);
    Tensor probe = Tensor::matrix(6, 3);
    for (auto& v : probe.storage()) v = rng.uniform(-1, 1);
    ad::ParameterSet p;
    p.add("e", e);
    const std::vector<std::size_t> offsets{0, 2, 6};
    const auto r = testing::check_gradients(
        p,
        [&](ad::Tape& t, const ad::ParameterSet& ps) {
            return ad::mse(segmented_attention(t.parameter(ps, 0), offsets, 1.7), probe);
        },
        1e-5);
    CHECK(r.relative_error < 1e-4);
    CHECK(r.analytic_norm > 0.0);
}

TEST_CASE("level-1 schedule anchors") {
    const double h = 0.2;
    const auto first = level1_schedule(0, 11, h);
    CHECK(first.bottom_up == doctest::Approx(0.8));
    CHECK(first.top_down == 0.0);
    const auto mid = level1_schedule(5, 11, h);
    CHECK(mid.bottom_up == doctest::Approx(0.4));
    CHECK(mid.top_down == doctest::Approx(0.4));
    const auto last = level1_schedule(10, 11, h);
    CHECK(last.bottom_up == 0.0);
    CHECK(last.top_down == doctest::Approx(0.8));
    const auto single = level1_schedule(0, 1, h);
    CHECK(single.bottom_up == doctest::Approx(0.8));
    CHECK(single.top_down == 0.0);
    CHECK_THROWS_AS(level1_schedule(3, 3, h), std::out_of_range);

    // A non-zero end weight keeps part of the bottom-up share on the last step.
    const auto kept = level1_schedule(10, 11, h, 0.25);
    CHECK(kept.bottom_up == doctest::Approx(0.2));
    CHECK(kept.top_down == doctest::Approx(0.6));
}

TEST_CASE("combination weights sum to exactly one") {
    for (double hist : {0.0, 0.1, 0.2, 0.3, 0.35, 0.5, 0.7, 0.9}) {
        for (double att : {0.0, 0.05, 0.1, 0.3, 0.4}) {
            if (hist + att >= 1.0) continue;
            for (std::size_t T : {1, 2, 3, 5, 7, 10, 11, 40}) {
                HyperParams hp;
                hp.history_weight = hist;
                hp.attention_weight = att;
                hp.iterations = T;
                for (double end : {0.0, 0.3}) {
                    hp.end_bottom_up_weight = end;
                    for (std::size_t t = 0; t < T; ++t) {
                        const auto w1 = level1_weights(hp, t);
                        const auto w2 = level2_weights(hp, t);
                        CHECK(w1.history + w1.bottom_up + w1.top_down == 1.0);
                        CHECK(w2.history + w2.bottom_up + w2.attention == 1.0);
                        CHECK(w1.bottom_up >= 0.0);
                        CHECK(w1.top_down >= 0.0);
                    }
                }
            }
        }
    }
}

TEST_CASE("hyper-parameter validation") {
    HyperParams hp;
    hp.history_weight = 0.7;
    hp.attention_weight = 0.3;
    CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
    hp = {};
    hp.iterations = 0;
    CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
    hp = {};
    hp.attention_temperature = 0.0;
    CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
    CHECK_THROWS_AS(HyperParams::from_map({{"no_such_key", "1"}}), std::invalid_argument);
    CHECK_THROWS_AS(HyperParams::from_map({{"iterations", "ten"}}), std::invalid_argument);
    const HyperParams round = HyperParams::from_map(HyperParams{}.to_map());
    CHECK(round.to_map() == HyperParams{}.to_map());
}

TEST_CASE("the first step from zero embeddings is bottom-up only") {
    for (bool from_first : {true, false}) {
        HyperParams hp = tiny_hp();
        hp.history_from_first = from_first;
        const EglomModel model(hp, 3);
        const Batch batch = make_batch(std::vector<world::Scene>{scene_with(4, 1)}, hp);
        ad::Tape tape;
        const ColumnState init = initial_state(tape, model, batch);
        const StepResult r = step(tape, model, batch, init, 0, tape.constant(batch.positions));
        const Tensor bu = model.symbol_encoder().forward(tape, model.params(), init.symbols).value();
        const double w = from_first ? 1.0 - hp.history_weight : 1.0;
        Tensor expected = bu;
        for (auto& v : expected.storage()) v *= w;
        CHECK(max_abs_diff(r.next.ellipse.value(), expected) < 1e-15);
        // Zero object embeddings stay zero under attention.
        CHECK(init.object.value() == Tensor::matrix(4, 8));
    }
}

TEST_CASE("forward is equivariant under location permutations") {
    HyperParams hp = tiny_hp(4);
    hp.attention_temperature = 2.0;
    const EglomModel model(hp, 11);
    const world::Scene s = random_scene(world::Task::two_from_two, 12);
    world::Scene p = s;
    std::vector<std::size_t> perm(s.size());
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(13);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    for (std::size_t i = 0; i < perm.size(); ++i) p.locations[i] = s.locations[perm[i]];

    ad::Tape t1, t2;
    const auto a = forward(t1, model, make_batch(std::vector<world::Scene>{s}, hp));
    const auto b = forward(t2, model, make_batch(std::vector<world::Scene>{p}, hp));
    double worst = 0.0;
    auto compare = [&](const Tensor& x, const Tensor& y) {
        for (std::size_t i = 0; i < perm.size(); ++i) {
            for (std::size_t c = 0; c < x.cols(); ++c) worst = std::max(worst, std::abs(y(i, c) - x(perm[i], c)));
        }
    };
    for (std::size_t k = 0; k < a.states.size(); ++k) {
        compare(a.states[k].object.value(), b.states[k].object.value());
        compare(a.states[k].ellipse.value(), b.states[k].ellipse.value());
        compare(a.states[k].symbols.value(), b.states[k].symbols.value());
    }
    compare(a.reconstructions.back().value(), b.reconstructions.back().value());
    compare(a.logits.value(), b.logits.value());
    CHECK(worst < 1e-9);
}

TEST_CASE("trajectory lengths") {
    for (std::size_t T : {1, 3}) {
        const HyperParams hp = tiny_hp(T);
        const EglomModel model(hp, 1);
        ad::Tape tape;
        const auto traj = forward(tape, model, make_batch(std::vector<world::Scene>{scene_with(3, 2)}, hp));
        CHECK(traj.states.size() == T + 1);
        CHECK(traj.reconstructions.size() == T);
        CHECK(traj.pose.value().cols() == 6);
        CHECK(traj.logits.value().cols() == hp.class_count);
    }
}

TEST_CASE("duplicate scenes in one batch give identical outputs") {
    const HyperParams hp = tiny_hp();
    const EglomModel model(hp, 4);
    const world::Scene s = random_scene(world::Task::two_from_two, 9);
    ad::Tape tape;
    const auto traj = forward(tape, model, make_batch(std::vector<world::Scene>{s, s}, hp));
    const Tensor& o = traj.states.back().object.value();
    const Tensor& r = traj.reconstructions.back().value();
    const std::size_t n = s.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < o.cols(); ++c) CHECK(o(i, c) == o(i + n, c));
        for (std::size_t c = 0; c < 6; ++c) CHECK(r(i, c) == r(i + n, c));
    }
}

TEST_CASE("empty batches are rejected") {
    const HyperParams hp = tiny_hp();
    const EglomModel model(hp, 4);
    ad::Tape tape;
    CHECK_THROWS_AS(forward(tape, model, Batch{}), ad::ContractError);
    world::Scene empty;
    CHECK_THROWS_AS(make_batch(std::vector<world::Scene>{empty}, hp), ad::ContractError);
}

TEST_CASE("loss examples") {
    ad::Tape tape;
    Batch batch;
    batch.targets = Tensor::from_rows({{1, 2, 3, 4, 5, 6}});
    batch.poses = Tensor::from_rows({{0, 0, 0, 0, 0, 0}});
    batch.labels = {1};
    batch.offsets = {0, 1};

    Trajectory traj;
    traj.reconstructions = {tape.constant(batch.targets), tape.constant(batch.targets)};
    CHECK(reconstruction_loss(traj, batch).value().item() == 0.0);

    // One iteration off by (1, 0, -1, 2, 0, 0): mean of squares 6/6, halved over two iterations.
    traj.reconstructions[1] = tape.constant(Tensor::from_rows({{2, 2, 2, 6, 5, 6}}));
    CHECK(reconstruction_loss(traj, batch).value().item() == doctest::Approx(0.5));

    traj.pose = tape.constant(Tensor::from_rows({{1, 0, 0, 0, 0, -1}}));
    traj.logits = tape.constant(Tensor::from_rows({{0.3, 0.3}}));
    CHECK(object_loss(traj, batch).value().item() == doctest::Approx(2.0 / 6.0 + std::log(2.0)));
    CHECK(object_loss(traj, batch, 0.0).value().item() == doctest::Approx(2.0 / 6.0));

    HyperParams hp;
    hp.lambda_reconstruction = 2.0;
    const Var total = total_loss(tape.constant(Tensor::scalar(0.5)), tape.constant(Tensor::scalar(1.0)),
                                 tape.constant(Tensor::scalar(0.0)), hp);
    CHECK(total.value().item() == doctest::Approx(2.0));
    hp.lambda_regularizer = 0.0;
    const Var two = total_loss(tape.constant(Tensor::scalar(0.25)), tape.constant(Tensor::scalar(0.5)),
                               tape.constant(Tensor::scalar(7.0)), hp);
    CHECK(two.value().item() == doctest::Approx(1.0));
}

TEST_CASE("island regularizer conventions") {
    ad::Tape tape;
    Trajectory traj;
    traj.states.resize(1);
    auto reg = [&](std::initializer_list<double> a, std::initializer_list<double> b) {
        traj.bottom_up_final = tape.constant(Tensor({1, a.size()}, std::vector<double>(a)));
        traj.states[0].object = tape.constant(Tensor({1, b.size()}, std::vector<double>(b)));
        return island_regularizer(traj).value().item();
    };
    CHECK(reg({1, 2, 3}, {1, 2, 3}) == doctest::Approx(0.0));
    CHECK(reg({1, 0}, {0, 3}) == doctest::Approx(1.0));
    CHECK(reg({1, -2}, {-2, 4}) == doctest::Approx(2.0));
    CHECK(reg({0, 0}, {0, 3}) == 0.0);
}

TEST_CASE("loss gradient through the unroll matches central differences") {
    for (bool attention : {true, false}) {
        HyperParams hp = tiny_hp(3);
        hp.attention_enabled = attention;
        hp.attention_temperature = 1.5;
        EglomModel model(hp, 21);
        const Batch batch = make_batch(std::vector<world::Scene>{scene_with(2, 22)}, hp);
        const auto r = testing::check_gradients(
            model.params(),
            [&](ad::Tape& t, const ad::ParameterSet&) {
                return loss_terms(forward(t, model, batch), batch, hp).total;
            },
            1e-5);
        CHECK(r.relative_error < 1e-3);
        CHECK(r.analytic_norm > 0.0);
    }
}

TEST_CASE("networks are shared across locations and iterations") {
    const HyperParams hp = tiny_hp(3);
    const EglomModel model(hp, 31);
    const Batch batch = make_batch(std::vector<world::Scene>{scene_with(3, 32)}, hp);
    ad::Tape tape;
    const auto traj = forward(tape, model, batch);
    for (std::size_t i = 0; i < model.params().size(); ++i) {
        const Tensor* storage = tape.parameter_storage(i);
        REQUIRE(storage != nullptr);
        CHECK(storage == &model.params()[i]);
    }

    // Every iteration's reconstruction loss reaches the shared decoder and the
    // first encoder.
    const std::size_t td1 = model.part_decoder().weight_index(0);
    const std::size_t bu0 = model.symbol_encoder().weight_index(0);
    for (std::size_t k = 0; k < hp.iterations; ++k) {
        ad::Tape t;
        const auto tr = forward(t, model, batch);
        t.backward(ad::mse(tr.reconstructions[k], batch.targets));
        const auto g = t.parameter_gradients(model.params());
        double n1 = 0.0, n0 = 0.0;
        for (double v : g[td1].storage()) n1 += v * v;
        for (double v : g[bu0].storage()) n0 += v * v;
        CHECK(n1 > 0.0);
        CHECK(n0 > 0.0);
    }
    (void)traj;
}

TEST_CASE("a perfectly reconstructed symbol is a fixed point of the level-0 update") {
    HyperParams hp = tiny_hp(5);
    EglomModel model(hp, 41);
    const world::Scene s = scene_with(3, 42);
    // td0 outputs a constant: zero last-layer weights, bias c.
    const std::size_t last = model.symbol_decoder().layer_count() - 1;
    model.params()[model.symbol_decoder().weight_index(last)].fill(0.0);
    const auto c = s.locations[0].input.to_array();
    Tensor& bias = model.params()[model.symbol_decoder().bias_index(last)];
    for (std::size_t k = 0; k < 6; ++k) bias[k] = c[k];

    world::Scene same = s;
    for (auto& loc : same.locations) loc.input = loc.truth = s.locations[0].input;
    const Batch batch = make_batch(std::vector<world::Scene>{same}, hp);
    ad::Tape tape;
    const auto traj = forward(tape, model, batch);
    for (const auto& st : traj.states) CHECK(max_abs_diff(st.symbols.value(), batch.symbols) < 1e-15);
    CHECK(reconstruction_loss(traj, batch).value().item() < 1e-30);
}

TEST_CASE("a non-finite weight is reported with its level and iteration") {
    const HyperParams hp = tiny_hp(3);
    EglomModel model(hp, 51);
    // The output layer has no rectifier to absorb the NaN.
    const std::size_t last = model.symbol_encoder().layer_count() - 1;
    model.params()[model.symbol_encoder().bias_index(last)][0] = std::nan("");
    const Batch batch = make_batch(std::vector<world::Scene>{scene_with(2, 52)}, hp);
    ad::Tape tape;
    try {
        forward(tape, model, batch);
        FAIL("expected NonFiniteError");
    } catch (const NonFiniteError& e) {
        CHECK(e.level() == "ellipse");
        CHECK(e.iteration() == 0);
        CHECK(e.row() == 0);
    }
}

TEST_CASE("model checkpoint round trip") {
    HyperParams hp = tiny_hp(2);
    hp.attention_temperature = 0.75;
    hp.symbol_decoder_hidden = {5, 3};
    const EglomModel model(hp, 61);
    const EglomModel back =
        EglomModel::from_checkpoint(ad::checkpoint_from_string(ad::checkpoint_to_string(model.to_checkpoint())));
    CHECK(back.hyper().to_map() == hp.to_map());
    const Batch batch = make_batch(std::vector<world::Scene>{scene_with(3, 62)}, hp);
    ad::Tape t1, t2;
    CHECK(forward(t1, model, batch).logits.value() == forward(t2, back, batch).logits.value());

    ad::Checkpoint other = model.to_checkpoint();
    other.kind = "baseline";
    CHECK_THROWS_AS(EglomModel::from_checkpoint(other), ad::CheckpointError);
}

TEST_CASE("parameter count follows the layer layout") {
    HyperParams hp;
    hp.embedding_dim = 500;
    hp.decoder_dim = 500;
    hp.class_count = 2;
    const std::size_t pe = 24;
    const std::size_t expected = mlp_count({6, 32, 64, 500}) + mlp_count({500, 500, 500}) +
                                 mlp_count({500, 64, 32, 8}) + mlp_count({500 + pe, 500, 500, 500}) +
                                 mlp_count({500 + pe, 64, 32, 6});
    CHECK(EglomModel::parameter_count(hp) == expected);
    CHECK(expected == 1369622);
    CHECK(EglomModel(tiny_hp(), 0).parameter_count() == EglomModel::parameter_count(tiny_hp()));
}

// The published figure for the D = 500 model is 2.3e6. The stated layer sizes
// account for about 1.37e6, so this comparison is reported but not enforced.
TEST_CASE("parameter count against the published D = 500 figure" * doctest::may_fail()) {
    HyperParams hp;
    hp.embedding_dim = 500;
    hp.decoder_dim = 500;
    const double n = double(EglomModel::parameter_count(hp));
    MESSAGE("D = 500 parameter count: " << n);
    CHECK(std::abs(n - 2.3e6) <= 0.1 * 2.3e6);
}

}  // TEST_SUITE
