#pragma once

#include <algorithm>
#include <atomic>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace hypoctrl {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

enum class ErrorKind {
  invalid_argument,
  not_accretive,
  unstable_drift,
  hypoellipticity_fails,
  domain_escape,
  under_resolved_region,
  unobservable_truncation,
  no_admissible_tau,
  step_size_failure,
  ill_conditioned,
  quadrature_failure,
  io_failure,
  schema_violation,
  unknown_preset,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::not_accretive: return "not accretive";
    case ErrorKind::unstable_drift: return "unstable drift";
    case ErrorKind::hypoellipticity_fails: return "hypoellipticity fails";
    case ErrorKind::domain_escape: return "domain escape";
    case ErrorKind::under_resolved_region: return "under-resolved region";
    case ErrorKind::unobservable_truncation: return "unobservable truncation";
    case ErrorKind::no_admissible_tau: return "no admissible tau";
    case ErrorKind::step_size_failure: return "step-size failure";
    case ErrorKind::ill_conditioned: return "ill-conditioned";
    case ErrorKind::quadrature_failure: return "quadrature failure";
    case ErrorKind::io_failure: return "I/O failure";
    case ErrorKind::schema_violation: return "schema violation";
    case ErrorKind::unknown_preset: return "unknown preset";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, const std::string& what,
                    ErrorKind kind = ErrorKind::invalid_argument) {
  if (!cond) throw Error(kind, what);
}

// Logging. Level comes from HYPOCTRL_LOG (error, warn, info, debug), default warn.
enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("HYPOCTRL_LOG");
    if (env == nullptr) return LogLevel::warn;
    std::string s(env);
    if (s == "error") return LogLevel::error;
    if (s == "info") return LogLevel::info;
    if (s == "debug") return LogLevel::debug;
    return LogLevel::warn;
  }();
  return level;
}

inline void log(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  static std::mutex mu;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::lock_guard<std::mutex> lock(mu);
  std::fprintf(stderr, "[hypoctrl %s] %s\n", names[static_cast<int>(level)], msg.c_str());
}

namespace detail {
inline std::atomic<unsigned>& thread_cap_slot() {
  static std::atomic<unsigned> cap{0};
  return cap;
}
}  // namespace detail

// 0 restores the default (hardware concurrency).
inline void set_thread_cap(unsigned n) { detail::thread_cap_slot().store(n); }

inline unsigned thread_count() {
  unsigned cap = detail::thread_cap_slot().load();
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return cap == 0 ? hw : std::min(cap, hw);
}

// Runs f(i) for i in [begin, end) on up to thread_count() workers, contiguous
// chunks per worker. The first exception thrown is rethrown on the caller.
template <class F>
void parallel_for(std::size_t begin, std::size_t end, F&& f) {
  if (end <= begin) return;
  const std::size_t count = end - begin;
  const std::size_t workers = std::min<std::size_t>(thread_count(), count);
  if (workers <= 1) {
    for (std::size_t i = begin; i < end; ++i) f(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = begin + w * chunk;
    const std::size_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i) f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace hypoctrl
