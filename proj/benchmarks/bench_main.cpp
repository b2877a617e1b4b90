#include "eglom/autodiff/ops.hpp"
#include "eglom/baseline/autoencoder.hpp"
#include "eglom/net/model.hpp"

#include <benchmark/benchmark.h>

using namespace eglom;

namespace {

std::vector<world::Scene> scenes(world::Task task, std::size_t n) {
    world::DatasetSpec spec;
    spec.task = task;
    spec.count = n;
    return world::generate_dataset(spec).scenes;
}

net::HyperParams desk_hp() {
    net::HyperParams hp;
    hp.embedding_dim = 128;
    hp.decoder_dim = 256;
    return hp;
}

void BM_Matmul(benchmark::State& state) {
    const auto n = std::size_t(state.range(0));
    Rng rng(1);
    ad::Tensor a = ad::Tensor::matrix(n, n), b = ad::Tensor::matrix(n, n);
    for (auto& v : a.storage()) v = rng.uniform(-1, 1);
    for (auto& v : b.storage()) v = rng.uniform(-1, 1);
    for (auto _ : state) {
        ad::Tape tape;
        benchmark::DoNotOptimize(ad::matmul(tape.constant(a), tape.constant(b)).value().data());
    }
    state.SetItemsProcessed(std::int64_t(state.iterations()) * std::int64_t(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_EglomForward(benchmark::State& state) {
    const auto hp = desk_hp();
    const net::EglomModel model(hp, 1);
    const auto batch = net::make_batch(scenes(world::Task::two_from_two, std::size_t(state.range(0))), hp);
    for (auto _ : state) {
        ad::Tape tape;
        benchmark::DoNotOptimize(net::forward(tape, model, batch).pose.value().data());
    }
    state.SetItemsProcessed(std::int64_t(state.iterations()) * state.range(0));
}
BENCHMARK(BM_EglomForward)->Arg(1)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_EglomForwardBackward(benchmark::State& state) {
    const auto hp = desk_hp();
    const net::EglomModel model(hp, 1);
    const auto batch = net::make_batch(scenes(world::Task::two_from_two, std::size_t(state.range(0))), hp);
    for (auto _ : state) {
        ad::Tape tape;
        const auto loss = net::loss_terms(net::forward(tape, model, batch), batch, hp).total;
        tape.backward(loss);
        benchmark::DoNotOptimize(tape.parameter_gradients(model.params()).squared_norm());
    }
    state.SetItemsProcessed(std::int64_t(state.iterations()) * state.range(0));
}
BENCHMARK(BM_EglomForwardBackward)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_BaselineForwardBackward(benchmark::State& state) {
    const auto spec = baseline::spec_for(world::Task::two_from_two);
    const baseline::BaselineModel model(spec, 1);
    const auto batch = baseline::make_batch(scenes(world::Task::two_from_two, std::size_t(state.range(0))), spec);
    for (auto _ : state) {
        ad::Tape tape;
        const auto loss = baseline::baseline_loss(baseline::baseline_forward(tape, model, batch), batch);
        tape.backward(loss);
        benchmark::DoNotOptimize(tape.parameter_gradients(model.params()).squared_norm());
    }
    state.SetItemsProcessed(std::int64_t(state.iterations()) * state.range(0));
}
BENCHMARK(BM_BaselineForwardBackward)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
