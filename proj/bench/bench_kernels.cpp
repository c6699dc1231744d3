// Serial vs OpenMP stego kernels on carrier-sized buffers.
#include <benchmark/benchmark.h>

#include <random>

#include "stegolock/stego.hpp"

using namespace stegolock;

namespace {

constexpr std::int64_t kMinSide = 256;
constexpr std::int64_t kMaxSide = 2048;

struct Buffers {
    Bytes cover, stego, payload;
};

Buffers make(std::int64_t side) {
    const std::size_t n = static_cast<std::size_t>(side * side * 3);
    std::mt19937_64 rng(side);
    Buffers b;
    b.cover.resize(n);
    for (auto& v : b.cover) v = static_cast<std::uint8_t>(rng());
    b.payload.resize(n / 8 - 4);
    for (auto& v : b.payload) v = static_cast<std::uint8_t>(rng());
    b.stego = b.cover;
    stego::serial::write_lsb_bits(b.stego, b.payload, 32);
    return b;
}

template <auto Fn>
void bm_write(benchmark::State& state) {
    auto b = make(state.range(0));
    for (auto _ : state) {
        Fn(std::span<std::uint8_t>(b.stego), ByteView(b.payload), 32);
        benchmark::ClobberMemory();
    }
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(b.cover.size()));
}

template <auto Fn>
void bm_read(benchmark::State& state) {
    const auto b = make(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(Fn(b.stego, 32, b.payload.size()));
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(b.cover.size()));
}

template <auto Fn>
void bm_diff(benchmark::State& state) {
    const auto b = make(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(Fn(b.cover, b.stego));
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(b.cover.size()));
}

}  // namespace

BENCHMARK(bm_write<stego::serial::write_lsb_bits>)->Name("write_lsb/serial")->RangeMultiplier(2)->Range(kMinSide, kMaxSide);
BENCHMARK(bm_write<stego::parallel::write_lsb_bits>)->Name("write_lsb/parallel")->RangeMultiplier(2)->Range(kMinSide, kMaxSide);
BENCHMARK(bm_read<stego::serial::read_lsb_bits>)->Name("read_lsb/serial")->RangeMultiplier(2)->Range(kMinSide, kMaxSide);
BENCHMARK(bm_read<stego::parallel::read_lsb_bits>)->Name("read_lsb/parallel")->RangeMultiplier(2)->Range(kMinSide, kMaxSide);
BENCHMARK(bm_diff<stego::serial::diff>)->Name("diff/serial")->RangeMultiplier(2)->Range(kMinSide, kMaxSide);
BENCHMARK(bm_diff<stego::parallel::diff>)->Name("diff/parallel")->RangeMultiplier(2)->Range(kMinSide, kMaxSide);

BENCHMARK_MAIN();
