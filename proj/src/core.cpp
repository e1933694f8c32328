#include "msle/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

namespace msle {

const char* to_string(Mode mode) {
  return mode == Mode::backward ? "backward" : "forward";
}

Mode mode_from_string(const std::string& name) {
  if (name == "backward") return Mode::backward;
  if (name == "forward") return Mode::forward;
  throw InputError("unknown mode '" + name + "' (expected backward|forward)");
}

Params Params::make(Mode mode, double kappa, std::size_t n_points,
                    std::optional<double> gamma, std::optional<double> chi,
                    std::vector<int> signs) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw InputError("kappa must be positive");
  if (n_points == 0) throw InputError("n_points must be at least 1");
  if (gamma && !(*gamma > 0.0)) throw InputError("gamma must be positive");
  if (chi && !(*chi > 0.0)) throw InputError("chi must be positive");
  if (signs.empty()) {
    int s = -1;
    if (mode == Mode::forward) s = kappa < 4.0 ? 1 : -1;
    signs.assign(n_points, s);
  }
  if (signs.size() != n_points) throw InputError("epsilon_signs must have length N");
  for (int s : signs) {
    if (s != 1 && s != -1) throw InputError("epsilon_signs entries must be +1 or -1");
  }
  return Params{mode, kappa, n_points, gamma, chi, std::move(signs)};
}

PointConfig validate_config(std::span<const double> points) {
  if (points.empty()) throw InputError("configuration must be nonempty");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i])) throw InputError("configuration entries must be finite");
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if (points[i] == points[j]) throw DuplicatePoint(i, j);
    }
  }
  return PointConfig(std::vector<double>(points.begin(), points.end()));
}

PointConfig PointConfig::with_value(std::size_t i, double value) const {
  std::vector<double> pts = points_;
  pts.at(i) = value;
  return validate_config(pts);
}

double PointConfig::min_gap() const {
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points_.size(); ++i)
    for (std::size_t j = i + 1; j < points_.size(); ++j)
      gap = std::min(gap, std::abs(points_[i] - points_[j]));
  return gap;
}

PointConfig transform_config(const PointConfig& cfg, double shift, double lambda) {
  if (!(lambda > 0.0)) throw InputError("scale must be positive");
  std::vector<double> pts(cfg.size());
  for (std::size_t k = 0; k < cfg.size(); ++k) pts[k] = lambda * cfg[k] + shift;
  return validate_config(pts);
}

// ---------------------------------------------------------------------------
// Philox4x32-10

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

// 53-bit uniform in (0, 1), never exactly 0.
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

double GaussianStream::at(std::uint64_t k) const {
  const std::uint64_t blk = k / 2;
  const Philox4x32::Counter ctr = {
      static_cast<std::uint32_t>(blk), static_cast<std::uint32_t>(blk >> 32) ^ spec_.stream,
      static_cast<std::uint32_t>(spec_.path_index),
      static_cast<std::uint32_t>(spec_.path_index >> 32)};
  const Philox4x32::Key key = {static_cast<std::uint32_t>(spec_.seed),
                               static_cast<std::uint32_t>(spec_.seed >> 32)};
  const auto out = Philox4x32::block(ctr, key);
  // Box-Muller on two 53-bit uniforms.
  const double u1 = to_open_unit(out[0], out[1]);
  const double u2 = to_open_unit(out[2], out[3]);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return (k % 2 == 0) ? r * std::cos(angle) : r * std::sin(angle);
}

double GaussianStream::next() { return at(position_++); }

std::vector<double> sample_increments(RngSpec rng, double dt, std::size_t n_steps) {
  if (!(dt > 0.0)) throw InputError("dt must be positive");
  GaussianStream gauss(rng);
  const double scale = std::sqrt(dt);
  std::vector<double> out(n_steps);
  for (auto& x : out) x = scale * gauss.next();
  return out;
}

DrivingPath DrivingPath::from_increments(double start, double kappa, double dt,
                                         std::vector<double> increments,
                                         std::span<const double> drifts) {
  if (!drifts.empty() && drifts.size() != increments.size())
    throw InputError("drifts must match increments in length");
  DrivingPath path;
  path.dt = dt;
  path.values.resize(increments.size() + 1);
  path.values[0] = start;
  const double sk = std::sqrt(kappa);
  for (std::size_t k = 0; k < increments.size(); ++k) {
    double w = path.values[k] + sk * increments[k];
    if (!drifts.empty()) w += drifts[k] * dt;
    path.values[k + 1] = w;
  }
  path.increments = std::move(increments);
  return path;
}

DrivingPath DrivingPath::constant(double value, double dt, std::size_t n_steps) {
  return from_increments(value, 1.0, dt, std::vector<double>(n_steps, 0.0));
}

McReport make_report(std::string name, double estimate, double std_error,
                     double reference, double tolerance, std::size_t n_samples) {
  McReport r{std::move(name), estimate, std_error, reference, tolerance, n_samples, false};
  r.pass = std::isfinite(estimate) && std::abs(estimate - reference) <= tolerance;
  return r;
}

void SampleStats::Neumaier::add(double x) {
  const double t = sum + x;
  if (std::abs(sum) >= std::abs(x))
    comp += (sum - t) + x;
  else
    comp += (x - t) + sum;
  sum = t;
}

void SampleStats::add(double x) {
  if (n_ == 0) shift_ = x;
  const double d = x - shift_;
  s1_.add(d);
  s2_.add(d * d);
  ++n_;
}

double SampleStats::mean() const {
  return n_ == 0 ? 0.0 : shift_ + s1_.value() / static_cast<double>(n_);
}

double SampleStats::variance() const {
  if (n_ < 2) return 0.0;
  const double n = static_cast<double>(n_);
  const double m = s1_.value() / n;
  return std::max(0.0, (s2_.value() - n * m * m) / (n - 1.0));
}

double SampleStats::std_error() const {
  return n_ < 2 ? 0.0 : std::sqrt(variance() / static_cast<double>(n_));
}

// ---------------------------------------------------------------------------
// Worker pool

namespace {

std::atomic<std::size_t> g_workers{0};

std::size_t default_workers() {
  if (const char* env = std::getenv("MSLE_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace

std::size_t worker_count() {
  std::size_t n = g_workers.load();
  return n == 0 ? default_workers() : n;
}

void set_worker_count(std::size_t n) { g_workers.store(n); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t k = 0; k < n; ++k) body(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::size_t first_index = n;
  std::mutex error_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= n) return;
      try {
        body(k);
      } catch (...) {
        // Indices are handed out in order, so every k' < k has been started
        // and will finish; keeping the lowest failing index is deterministic.
        std::lock_guard lock(error_mutex);
        if (k < first_index) {
          first_index = k;
          first_error = std::current_exception();
        }
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace msle
