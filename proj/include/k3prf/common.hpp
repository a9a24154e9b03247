#pragma once

// shared plumbing: error taxonomy, logging, seeded rng with stream
// splitting, a deterministic parallel_for, and small dense-algebra
// helpers used across the library.

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace k3prf {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// errors.  the CLI maps these onto process exit codes, so library code
// should pick the most specific type that applies:
//   InvalidInput   -> bad arguments / bad configuration        (exit 2)
//   DataError      -> unreadable or malformed data             (exit 3)
//   NumericalError -> singular / ill-conditioned computations  (exit 4)
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidInput : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct NumericalError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// logging.  level comes from the K3PRF_LOG environment variable
// (error|warn|info|debug), default warn.  output goes to stderr so it
// never contaminates machine-readable stdout.
// ---------------------------------------------------------------------------

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("K3PRF_LOG");
    if (env == nullptr) return LogLevel::Warn;
    const std::string v(env);
    if (v == "error") return LogLevel::Error;
    if (v == "warn") return LogLevel::Warn;
    if (v == "info") return LogLevel::Info;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Warn;
  }();
  return level;
}

inline void log_msg(LogLevel level, const std::string& msg) {
  if (level > log_level()) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "[k3prf %s] %s\n", names[static_cast<int>(level)],
               msg.c_str());
}

inline void log_warn(const std::string& msg) { log_msg(LogLevel::Warn, msg); }
inline void log_info(const std::string& msg) { log_msg(LogLevel::Info, msg); }

// ---------------------------------------------------------------------------
// rng.  mt19937_64 core with a hand-rolled Box-Muller transform so that
// draws are bit-stable across standard library versions (std::normal_
// distribution is implementation-defined).  derive_seed gives a cheap
// splittable stream scheme: children are independent for distinct keys.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0) {
  return splitmix64(splitmix64(master ^ (a * 0x9e3779b97f4a7c15ULL)) ^
                    (b * 0xd1b54a32d192ed03ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // uniform on (0, 1); never returns an exact endpoint
  double uniform() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller, pair cached
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  VectorXd normal_vector(Eigen::Index n, double sd = 1.0) {
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = sd * normal();
    return v;
  }

  MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols,
                         double sd = 1.0) {
    MatrixXd m(rows, cols);
    // row-major fill order, fixed so draws do not depend on storage scheme
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = sd * normal();
    return m;
  }

  std::uint64_t next_u64() { return eng_(); }

  // integer in [0, n)
  std::uint64_t below(std::uint64_t n) { return eng_() % n; }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// ---------------------------------------------------------------------------
// deterministic parallel_for: each index writes only its own output slot,
// so results are identical for any thread count.
// ---------------------------------------------------------------------------

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  threads = resolve_threads(threads);
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const int workers = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(threads), n));
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// dense-algebra helpers
// ---------------------------------------------------------------------------

// applies the demeaning projector (I - ii'/T) from the left without ever
// materializing it: every column loses its mean.  idempotent; annihilates
// constant columns.
inline MatrixXd demean_columns(const MatrixXd& U) {
  return U.rowwise() - U.colwise().mean();
}

inline VectorXd demean(const VectorXd& v) {
  return VectorXd(v.array() - v.mean());
}

// least squares by rank-revealing QR.  throws NumericalError naming the
// caller when the design is rank deficient.
inline MatrixXd ols_multi(const MatrixXd& X, const MatrixXd& Y,
                          const char* what) {
  if (X.rows() != Y.rows())
    throw InvalidInput(std::string("ols: row mismatch in ") + what);
  if (X.rows() < X.cols())
    throw NumericalError(std::string("ols: underdetermined design in ") + what);
  Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
  qr.setThreshold(1e-12);
  if (qr.rank() < X.cols())
    throw NumericalError(std::string("ols: rank-deficient design in ") + what);
  return qr.solve(Y);
}

inline VectorXd ols(const MatrixXd& X, const VectorXd& y, const char* what) {
  return ols_multi(X, MatrixXd(y), what);
}

// prepends an intercept column of ones
inline MatrixXd with_intercept(const MatrixXd& X) {
  MatrixXd D(X.rows(), X.cols() + 1);
  D.col(0).setOnes();
  D.rightCols(X.cols()) = X;
  return D;
}

// symmetric solve with a conditioning guard.  small systems only (proxy
// blocks), so a full eigendecomposition is cheap.  when the condition
// number exceeds cond_limit a ridge of jitter_rel * trace/L is added once
// and the event is logged; if the system is still singular we throw a
// NumericalError naming the matrix.
class SymSolver {
 public:
  SymSolver(const MatrixXd& S, const char* name, bool allow_jitter = true,
            double cond_limit = 1e12, double jitter_rel = 1e-10)
      : name_(name), cond_limit_(cond_limit) {
    if (S.rows() != S.cols())
      throw InvalidInput(std::string("SymSolver: ") + name + " not square");
    factor(S);
    if (!ok()) {
      const double tr = S.trace();
      if (!allow_jitter || !(tr > 0.0))
        throw NumericalError(std::string("ill-conditioned matrix ") + name_ +
                             " (rank deficient or condition beyond 1e12)");
      jitter_ = jitter_rel * tr / static_cast<double>(S.rows());
      log_warn(std::string("adding ridge jitter ") + std::to_string(jitter_) +
               " to ill-conditioned matrix " + name_);
      factor(S + jitter_ * MatrixXd::Identity(S.rows(), S.cols()));
      if (!ok())
        throw NumericalError(std::string("ill-conditioned matrix ") + name_ +
                             " unusable even after ridge jitter");
    }
  }

  template <typename Derived>
  MatrixXd solve(const Eigen::MatrixBase<Derived>& B) const {
    return vecs_ * vals_.cwiseInverse().asDiagonal() * (vecs_.transpose() * B);
  }

  double jitter() const { return jitter_; }

 private:
  void factor(const MatrixXd& S) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
    if (es.info() != Eigen::Success)
      throw NumericalError(std::string("eigendecomposition failed for ") +
                           name_);
    vals_ = es.eigenvalues();
    vecs_ = es.eigenvectors();
  }

  bool ok() const {
    const double lmax = vals_.cwiseAbs().maxCoeff();
    const double lmin = vals_.minCoeff();
    if (!(lmax > 0.0)) return false;
    if (lmin <= 0.0) return false;
    return lmax / lmin <= cond_limit_;
  }

  std::string name_;
  VectorXd vals_;
  MatrixXd vecs_;
  double jitter_ = 0.0;
  double cond_limit_ = 1e12;
};

// fnv-1a, used for config hashing in run manifests
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace k3prf
