#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "kinex/cdf.hpp"
#include "kinex/density.hpp"
#include "kinex/numerics.hpp"
#include "kinex/operators.hpp"
#include "kinex/version.hpp"

namespace kinex {

/// SplitMix64 (Steele/Lea/Flood's 64-bit mixer). Used as a counter-keyed
/// stream generator: every (seed, day, pair) triple owns an independent
/// stream, so pair updates within a day are deterministic under any
/// execution schedule.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform draw in [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Unbiased draw in [0, n) by rejection.
    std::uint64_t next_below(std::uint64_t n) {
        std::uint64_t threshold = (0 - n) % n;
        while (true) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

private:
    std::uint64_t state_;
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Hash chain over (seed, a, b) selecting one stream out of the family.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = mix64(seed + 0x9e3779b97f4a7c15ull);
    h = mix64(h ^ (a + 0x9e3779b97f4a7c15ull));
    h = mix64(h ^ (b + 0x6a09e667f3bcc909ull));
    return h;
}

constexpr std::uint64_t kShuffleTag = 0x5348554646ull; // pairing permutation
constexpr std::uint64_t kInitTag = 0x494e4954ull;      // initial sampling

} // namespace detail

/// Default stream family: pair p on day d draws from
/// SplitMix64(hash(seed, d, p)).
struct KeyedPairStreams {
    std::uint64_t seed;
    SplitMix64 operator()(std::uint64_t day, std::uint64_t pair) const {
        return SplitMix64(detail::stream_key(seed, day, pair));
    }
};

struct PairUpdate {
    double first;
    double second;
};

/// Bidirectional rule: each side sends an independent uniform fraction to
/// the other. The sum is conserved identically (the two transfers cancel).
inline PairUpdate ie_exchange(double x_first, double x_second, double eps_first,
                              double eps_second) {
    double sent_first = eps_first * x_first;
    double sent_second = eps_second * x_second;
    return {x_first - sent_first + sent_second, x_second - sent_second + sent_first};
}

/// Unidirectional rule: the loser sends a uniform fraction to the winner.
inline PairUpdate drm_transfer(double x_loser, double x_winner, double eps) {
    double sent = eps * x_loser;
    return {x_loser - sent, x_winner + sent};
}

/// Finite population of agent wealths, advanced one synchronous day at a
/// time: all agents are paired uniformly at random and every pair trades
/// once per day.
class Population {
public:
    explicit Population(std::vector<double> wealths) : wealths_(std::move(wealths)) {
        if (wealths_.size() < 2 || wealths_.size() % 2 != 0)
            throw std::invalid_argument("Population: need an even number (>= 2) of agents");
        for (double x : wealths_)
            if (!std::isfinite(x) || x < 0.0)
                throw std::invalid_argument("Population: wealths must be finite and nonnegative");
        initial_total_ = compensated_total(wealths_);
    }

    int size() const { return static_cast<int>(wealths_.size()); }
    std::uint64_t day() const { return day_; }
    std::span<const double> wealths() const { return wealths_; }
    double initial_total() const { return initial_total_; }
    double total() const { return compensated_total(wealths_); }

    /// One synchronous day with an injected stream family; the default
    /// entry point below keys everything from a single seed. Draw order per
    /// pair is fixed (branch coin, then the branch's draws; the lower agent
    /// index always draws first) so forced-stream tests are well defined.
    template <class StreamFactory>
    void step_day_with(const ModelKind& model, StreamFactory&& pair_streams,
                       SplitMix64 shuffle_rng) {
        const std::size_t n = wealths_.size();
        perm_.resize(n);
        std::iota(perm_.begin(), perm_.end(), std::size_t{0});
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(perm_[i], perm_[shuffle_rng.next_below(i + 1)]);

        const double mu = model.mu();
        for (std::size_t p = 0; p < n / 2; ++p) {
            std::size_t lo = perm_[2 * p];
            std::size_t hi = perm_[2 * p + 1];
            if (lo > hi) std::swap(lo, hi);
            auto stream = pair_streams(day_, static_cast<std::uint64_t>(p));

            // The branch coin is drawn even for the pure models (mu = 0 or
            // 1), so a mixed run at an endpoint replays the pure model's
            // draws bit for bit.
            double coin = stream.next_unit();
            if (coin < mu) {
                double pick = stream.next_unit();
                std::size_t loser = pick < 0.5 ? lo : hi;
                std::size_t winner = loser == lo ? hi : lo;
                double eps = stream.next_unit();
                PairUpdate u = drm_transfer(wealths_[loser], wealths_[winner], eps);
                wealths_[loser] = u.first;
                wealths_[winner] = u.second;
            } else {
                double eps_lo = stream.next_unit();
                double eps_hi = stream.next_unit();
                PairUpdate u = ie_exchange(wealths_[lo], wealths_[hi], eps_lo, eps_hi);
                wealths_[lo] = u.first;
                wealths_[hi] = u.second;
            }
        }
        ++day_;
    }

    void step_day(const ModelKind& model, std::uint64_t seed) {
        step_day_with(model, KeyedPairStreams{seed},
                      SplitMix64(detail::stream_key(seed, day_, detail::kShuffleTag)));
    }

private:
    std::vector<double> wealths_;
    std::vector<std::size_t> perm_;
    double initial_total_ = 0.0;
    std::uint64_t day_ = 0;
};

struct EqualInitial {
    double w = 1.0;
};
struct DensityInitial {
    Density density;
};
using InitialCondition = std::variant<EqualInitial, DensityInitial>;

struct SimConfig {
    ModelKind model = ModelKind::immediate_exchange();
    int n_agents = 1000;
    int days = 100;
    std::uint64_t seed = 0;
    InitialCondition initial = EqualInitial{1.0};
    int record_every = 1;

    void validate() const {
        if (n_agents < 2 || n_agents % 2 != 0)
            throw std::invalid_argument("SimConfig: n_agents must be even and >= 2");
        if (days < 0) throw std::invalid_argument("SimConfig: days must be nonnegative");
        if (record_every < 1) throw std::invalid_argument("SimConfig: record_every must be >= 1");
    }
};

/// Everything needed to reproduce a run bit for bit.
struct RunManifest {
    std::string model;
    double mu = 0.0;
    int n_agents = 0;
    int days = 0;
    std::uint64_t seed = 0;
    int record_every = 1;
    std::string initial;       // "equal" | "density"
    double initial_w = 0.0;    // mean of the initial condition
    double grid_x_max = 0.0;   // 0 when no grid is involved
    int grid_n = 0;
    std::string version = kVersion;
};

struct Snapshot {
    int day = 0;
    std::vector<double> wealths;
};

struct RunResult {
    EmpiricalSample sample;
    std::vector<Snapshot> snapshots;
    RunManifest manifest;
};

namespace detail {

/// Inverse-CDF draw from a grid density (linear within cells).
inline double sample_from_density(const Density& p, const std::vector<double>& F, double u) {
    const Grid& g = p.grid();
    auto it = std::upper_bound(F.begin(), F.end(), u);
    std::size_t k = static_cast<std::size_t>(it - F.begin());
    if (k == 0) return 0.0;
    if (k > static_cast<std::size_t>(g.size())) return g.x_max();
    double v = p.value(static_cast<int>(k - 1));
    if (v <= 0.0) return g.edge(static_cast<int>(k - 1));
    return g.edge(static_cast<int>(k - 1)) + (u - F[k - 1]) / v;
}

} // namespace detail

/// Drive a finite-population run: identical config and seed give
/// bit-identical output. Snapshots are taken at day 0, every record_every
/// days, and on the final day.
inline RunResult run(const SimConfig& config) {
    config.validate();

    std::vector<double> init(static_cast<std::size_t>(config.n_agents));
    RunManifest manifest;
    manifest.model = config.model.name();
    manifest.mu = config.model.mu();
    manifest.n_agents = config.n_agents;
    manifest.days = config.days;
    manifest.seed = config.seed;
    manifest.record_every = config.record_every;

    if (const auto* eq = std::get_if<EqualInitial>(&config.initial)) {
        if (!(eq->w > 0.0))
            throw std::invalid_argument("run: equal initial wealth must be positive");
        std::fill(init.begin(), init.end(), eq->w);
        manifest.initial = "equal";
        manifest.initial_w = eq->w;
    } else {
        const Density& p = std::get<DensityInitial>(config.initial).density;
        if (std::abs(p.mass() - 1.0) > 1e-9)
            throw std::invalid_argument("run: initial density must be normalized");
        std::vector<double> F = p.cumulative_edges();
        double top = F.back();
        SplitMix64 rng(detail::stream_key(config.seed, detail::kInitTag, 0));
        for (double& x : init)
            x = detail::sample_from_density(p, F, rng.next_unit() * top);
        manifest.initial = "density";
        manifest.initial_w = mean_wealth(p);
        manifest.grid_x_max = p.grid().x_max();
        manifest.grid_n = p.grid().size();
    }

    Population pop(std::move(init));
    RunResult result;
    result.manifest = manifest;

    auto record = [&](int day) {
        if (!result.snapshots.empty() && result.snapshots.back().day == day) return;
        result.snapshots.push_back(
            {day, std::vector<double>(pop.wealths().begin(), pop.wealths().end())});
    };

    record(0);
    for (int d = 1; d <= config.days; ++d) {
        pop.step_day(config.model, config.seed);
        if (d % config.record_every == 0) record(d);
    }
    record(config.days);

    result.sample.wealths.assign(pop.wealths().begin(), pop.wealths().end());
    result.sample.seed = config.seed;
    return result;
}

/// Sample moments (averages of x^k) of an empirical sample.
inline MomentReport empirical_moments(const EmpiricalSample& sample,
                                      std::vector<double> orders) {
    sample.validate();
    MomentReport r;
    r.method = MomentReport::Method::MonteCarlo;
    for (double k : orders) {
        CompensatedSum acc;
        for (double x : sample.wealths) acc.add(std::pow(x, k));
        r.values.push_back(acc.value() / static_cast<double>(sample.wealths.size()));
    }
    r.orders = std::move(orders);
    return r;
}

} // namespace kinex
