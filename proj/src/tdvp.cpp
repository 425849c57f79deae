#include "tjm/tdvp.hpp"

#include <algorithm>
#include <cmath>

#include "tjm/errors.hpp"

namespace tjm {

namespace {

Tensor trivial_env() { return Tensor({1, 1, 1}, {cplx{1.0}}); }

struct Sweeper {
  const Mpo& h;
  const TdvpConfig& cfg;
  std::vector<Tensor> sites;
  EnvironmentCache env;
  std::size_t length;
  std::size_t d;
  std::vector<std::size_t> start_bonds;  // bond extents before the step

  Tensor dense_evolve(const Eigen::MatrixXcd& a, const Tensor& x, cplx pre) const {
    Tensor out(x.shape());
    out.as_vector() = lanczos_expm_apply(a, x.as_vector(), pre, cfg.lanczos_max_iters, cfg.lanczos_tol);
    return out;
  }

  Tensor evolve_site(std::size_t l, const Tensor& m, cplx pre) const {
    const Tensor& le = env.left[l];
    const Tensor& re = env.right[l + 1];
    const Tensor& w = h.site(l);
    if (m.size() <= dense_effective_max_dim) return dense_evolve(effective_matrix_one_site(le, w, re), m, pre);
    return lanczos_expm_apply([&](const Tensor& x) { return effective_apply_one_site(le, w, re, x); }, m, pre,
                              cfg.lanczos_max_iters, cfg.lanczos_tol);
  }

  // C sits on bond b (between sites b - 1 and b).
  Tensor evolve_bond(std::size_t b, const Tensor& c, cplx pre) const {
    const Tensor& le = env.left[b];
    const Tensor& re = env.right[b];
    if (c.size() <= dense_effective_max_dim) return dense_evolve(effective_matrix_bond(le, re), c, pre);
    return lanczos_expm_apply([&](const Tensor& x) { return effective_apply_bond(le, re, x); }, c, pre,
                              cfg.lanczos_max_iters, cfg.lanczos_tol);
  }

  Tensor evolve_pair(std::size_t l, const Tensor& theta, cplx pre) const {
    const Tensor& le = env.left[l];
    const Tensor& re = env.right[l + 2];
    const Tensor& w1 = h.site(l);
    const Tensor& w2 = h.site(l + 1);
    if (theta.size() <= dense_effective_max_dim)
      return dense_evolve(effective_matrix_two_site(le, w1, w2, re), theta, pre);
    return lanczos_expm_apply(
        [&](const Tensor& x) { return effective_apply_two_site(le, w1, w2, re, x); }, theta, pre,
        cfg.lanczos_max_iters, cfg.lanczos_tol);
  }

  Tensor merged(std::size_t l) const {
    return contract(sites[l], sites[l + 1], {{2, 1}}).permuted({0, 2, 1, 3});  // (s1, s2, a, c)
  }

  // Splits theta (s1, s2, a, c) on bond b with at most d * chi kept values,
  // chi taken before the step; kept values are rescaled to the norm of theta.
  SvdSplit split(const Tensor& theta, std::size_t b) const {
    SvdSplit sv = svd_split(theta, {0, 2}, d * start_bonds[b], cfg.svd_threshold);
    if (sv.discarded_weight > 0.0) {
      double kept = 0.0;
      for (double s : sv.singular_values) kept += s * s;
      const double f = std::sqrt((kept + sv.discarded_weight) / kept);
      for (double& s : sv.singular_values) s *= f;
    }
    return sv;
  }

  static Tensor scale_rows(Tensor vh, const std::vector<double>& s) {
    const std::size_t k = s.size();
    const std::size_t cols = vh.size() / k;
    cplx* p = vh.data();
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < cols; ++j) p[i * cols + j] *= s[i];
    return vh;
  }

  static Tensor scale_last(Tensor u, const std::vector<double>& s) {
    const std::size_t k = s.size();
    cplx* p = u.data();
    for (std::size_t i = 0; i < u.size(); ++i) p[i] *= s[i % k];
    return u;
  }

  bool use_two_site(TdvpMode mode, std::size_t bond, bool global_two) const {
    switch (mode) {
      case TdvpMode::one_site: return false;
      case TdvpMode::two_site: return true;
      case TdvpMode::dynamic:
        if (cfg.global_switch) return global_two;
        return sites[bond].extent(1) < cfg.chi_max;
    }
    return false;
  }

  void left_to_right(double tau, TdvpMode mode, bool global_two) {
    const cplx fwd{0.0, -tau};
    const cplx bwd{0.0, tau};
    for (std::size_t l = 0; l < length; ++l) {
      if (l + 1 == length) {
        sites[l] = evolve_site(l, sites[l], fwd);
        break;
      }
      if (use_two_site(mode, l + 1, global_two)) {
        Tensor theta = evolve_pair(l, merged(l), fwd);
        SvdSplit sv = split(theta, l + 1);
        sites[l] = std::move(sv.u);  // (s1, a, k)
        env.left[l + 1] = left_env_step(env.left[l], sites[l], h.site(l), sites[l]);
        sites[l + 1] = scale_rows(std::move(sv.vh), sv.singular_values).permuted({1, 0, 2});
        if (l + 2 == length) break;
        sites[l + 1] = evolve_site(l + 1, sites[l + 1], bwd);
      } else {
        Tensor m = evolve_site(l, sites[l], fwd);
        auto [q, r] = qr_split(m, {0, 1});
        sites[l] = std::move(q);
        env.left[l + 1] = left_env_step(env.left[l], sites[l], h.site(l), sites[l]);
        Tensor c = evolve_bond(l + 1, r, bwd);
        sites[l + 1] = contract(c, sites[l + 1], {{1, 1}}).permuted({1, 0, 2});
      }
    }
  }

  void right_to_left(double tau, TdvpMode mode, bool global_two) {
    const cplx fwd{0.0, -tau};
    const cplx bwd{0.0, tau};
    for (std::size_t l = length; l-- > 0;) {
      if (l == 0) {
        sites[0] = evolve_site(0, sites[0], fwd);
        break;
      }
      if (use_two_site(mode, l, global_two)) {
        Tensor theta = evolve_pair(l - 1, merged(l - 1), fwd);
        SvdSplit sv = split(theta, l);
        sites[l] = sv.vh.permuted({1, 0, 2});  // (s2, k, c)
        env.right[l] = right_env_step(env.right[l + 1], sites[l], h.site(l), sites[l]);
        sites[l - 1] = scale_last(std::move(sv.u), sv.singular_values);
        if (l == 1) break;
        sites[l - 1] = evolve_site(l - 1, sites[l - 1], bwd);
      } else {
        Tensor m = evolve_site(l, sites[l], fwd);
        auto [q, r] = qr_split(m, {0, 2});  // q: (s, c, k), r: (k, a)
        sites[l] = q.permuted({0, 2, 1});
        env.right[l] = right_env_step(env.right[l + 1], sites[l], h.site(l), sites[l]);
        Tensor c = evolve_bond(l, r.permuted({1, 0}), bwd);
        sites[l - 1] = contract(sites[l - 1], c, {{2, 0}});
      }
    }
  }
};

}  // namespace

void validate_tdvp_config(const TdvpConfig& cfg) {
  if (cfg.chi_max < 1) throw PreconditionError("tdvp: chi_max must be at least 1");
  if (!(cfg.svd_threshold >= 0.0 && cfg.svd_threshold < 1.0))
    throw PreconditionError("tdvp: svd_threshold must lie in [0, 1)");
  if (cfg.lanczos_max_iters < 1) throw PreconditionError("tdvp: lanczos_max_iters must be positive");
  if (!(cfg.lanczos_tol > 0.0 && cfg.lanczos_tol < 1.0))
    throw PreconditionError("tdvp: lanczos_tol must lie in (0, 1)");
}

EnvironmentCache build_environments(const Mps& psi, const Mpo& h) {
  if (psi.length() != h.length() || psi.phys_dim() != h.phys_dim())
    throw DimensionError("build_environments: state and Hamiltonian differ in length or physical dimension");
  if (!psi.center()) throw PreconditionError("build_environments: state has no known center");
  const std::size_t length = psi.length();
  const std::size_t c = *psi.center();
  EnvironmentCache env;
  env.left.assign(length + 1, Tensor());
  env.right.assign(length + 1, Tensor());
  env.left[0] = trivial_env();
  env.right[length] = trivial_env();
  for (std::size_t l = 0; l < c; ++l)
    env.left[l + 1] = left_env_step(env.left[l], psi.site(l), h.site(l), psi.site(l));
  for (std::size_t l = length; l-- > c + 1;)
    env.right[l] = right_env_step(env.right[l + 1], psi.site(l), h.site(l), psi.site(l));
  return env;
}

Tensor effective_apply_one_site(const Tensor& left, const Tensor& w, const Tensor& right, const Tensor& m) {
  if (left.extent(2) != m.extent(1) || right.extent(2) != m.extent(2) || w.extent(1) != m.extent(0) ||
      left.extent(1) != w.extent(2) || right.extent(1) != w.extent(3))
    throw DimensionError("effective_apply_one_site: inconsistent shapes");
  Tensor t1 = contract(left, m, {{2, 1}});          // (a', w, s, b)
  Tensor t2 = contract(t1, w, {{1, 2}, {2, 1}});    // (a', b, s', w')
  Tensor t3 = contract(t2, right, {{1, 2}, {3, 1}});  // (a', s', b')
  return t3.permuted({1, 0, 2});
}

Tensor effective_apply_bond(const Tensor& left, const Tensor& right, const Tensor& c) {
  if (left.extent(2) != c.extent(0) || right.extent(2) != c.extent(1) || left.extent(1) != right.extent(1))
    throw DimensionError("effective_apply_bond: inconsistent shapes");
  Tensor t = contract(left, c, {{2, 0}});          // (a', w, b)
  return contract(t, right, {{1, 1}, {2, 2}});     // (a', b')
}

Tensor effective_apply_two_site(const Tensor& left, const Tensor& w1, const Tensor& w2, const Tensor& right,
                                const Tensor& theta) {
  if (left.extent(2) != theta.extent(2) || right.extent(2) != theta.extent(3) ||
      w1.extent(1) != theta.extent(0) || w2.extent(1) != theta.extent(1) || w1.extent(3) != w2.extent(2) ||
      left.extent(1) != w1.extent(2) || right.extent(1) != w2.extent(3))
    throw DimensionError("effective_apply_two_site: inconsistent shapes");
  Tensor t1 = contract(left, theta, {{2, 2}});          // (a', w, s1, s2, c)
  Tensor t2 = contract(t1, w1, {{1, 2}, {2, 1}});       // (a', s2, c, s1', w1)
  Tensor t3 = contract(t2, w2, {{4, 2}, {1, 1}});       // (a', c, s1', s2', w2)
  Tensor t4 = contract(t3, right, {{1, 2}, {4, 1}});    // (a', s1', s2', c')
  return t4.permuted({1, 2, 0, 3});
}

namespace {

template <typename Apply>
Eigen::VectorXcd lanczos_core(Apply&& apply, const Eigen::VectorXcd& v, cplx prefactor, int max_iters,
                              double tol) {
  const double beta0 = v.norm();
  if (beta0 == 0.0) return v;
  const Eigen::Index n = v.size();
  const int kmax = static_cast<int>(std::min<Eigen::Index>(std::max(max_iters, 1), n));

  std::vector<Eigen::VectorXcd> basis;
  basis.reserve(static_cast<std::size_t>(kmax));
  basis.push_back(v / beta0);
  Eigen::VectorXd alpha(kmax), beta(kmax);
  Eigen::VectorXcd w(n), y;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  // Taylor-type estimate |prefactor|^m prod(beta) / m! of the last Krylov
  // coefficient; while it is far above tol the eigensolve runs only every
  // fourth iteration.
  double taylor = 1.0;

  for (int k = 0; k < kmax; ++k) {
    apply(basis.back(), w);
    alpha(k) = basis.back().dot(w).real();
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) w -= q.dot(w) * q;
    const double b = w.norm();

    const Eigen::Index m = k + 1;
    const bool breakdown = b <= 1e-13 * std::max(1.0, std::abs(alpha(k)));
    taylor *= std::abs(prefactor) * b / static_cast<double>(m);
    if (!breakdown && k + 1 < kmax && taylor > 1e3 * tol && m % 4 != 0) {
      beta(k) = b;
      basis.push_back(w / b);
      continue;
    }
    es.computeFromTridiagonal(alpha.head(m), beta.head(m - 1), Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw NumericError("lanczos: tridiagonal eigensolver failed");
    const Eigen::MatrixXcd s = es.eigenvectors().cast<cplx>();
    const Eigen::VectorXcd e = (prefactor * es.eigenvalues().cast<cplx>().array()).exp();
    y = s * (e.asDiagonal() * s.row(0).transpose());

    if (breakdown || std::abs(b * y(m - 1)) < tol || k + 1 == kmax) break;
    beta(k) = b;
    basis.push_back(w / b);
  }

  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(n);
  for (Eigen::Index i = 0; i < y.size(); ++i) out += (beta0 * y(i)) * basis[static_cast<std::size_t>(i)];
  if (!out.allFinite()) throw NumericError("lanczos: non-finite result");
  return out;
}

}  // namespace

Tensor lanczos_expm_apply(const LinearMap& apply, const Tensor& v, cplx prefactor, int max_iters, double tol) {
  Tensor work(v.shape());
  auto f = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) {
    work.as_vector() = x;
    y = apply(work).as_vector();
  };
  Tensor out(v.shape());
  out.as_vector() = lanczos_core(f, v.as_vector(), prefactor, max_iters, tol);
  return out;
}

Eigen::VectorXcd lanczos_expm_apply(const Eigen::MatrixXcd& a, const Eigen::VectorXcd& v, cplx prefactor,
                                    int max_iters, double tol) {
  if (a.rows() != v.size() || a.cols() != v.size()) throw DimensionError("lanczos: matrix and vector sizes differ");
  auto f = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) { y.noalias() = a * x; };
  return lanczos_core(f, v, prefactor, max_iters, tol);
}

Eigen::MatrixXcd effective_matrix_one_site(const Tensor& left, const Tensor& w, const Tensor& right) {
  if (left.extent(1) != w.extent(2) || right.extent(1) != w.extent(3) || w.extent(0) != w.extent(1))
    throw DimensionError("effective_matrix_one_site: inconsistent shapes");
  const std::size_t d = w.extent(0), dl = w.extent(2), dr = w.extent(3);
  const std::size_t a = left.extent(0), b = right.extent(0);
  const std::size_t n = d * a * b;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const cplx* lp = left.data();
  const cplx* rp = right.data();
  const cplx* wp = w.data();
  for (std::size_t s = 0; s < d; ++s)
    for (std::size_t t = 0; t < d; ++t)
      for (std::size_t x = 0; x < dl; ++x)
        for (std::size_t y = 0; y < dr; ++y) {
          const cplx wv = wp[((s * d + t) * dl + x) * dr + y];
          if (wv == cplx{}) continue;
          for (std::size_t i = 0; i < a; ++i)
            for (std::size_t ip = 0; ip < a; ++ip) {
              const cplx lv = wv * lp[(i * dl + x) * a + ip];
              if (lv == cplx{}) continue;
              for (std::size_t j = 0; j < b; ++j)
                for (std::size_t jp = 0; jp < b; ++jp)
                  m(static_cast<Eigen::Index>((s * a + i) * b + j), static_cast<Eigen::Index>((t * a + ip) * b + jp)) +=
                      lv * rp[(j * dr + y) * b + jp];
            }
        }
  return m;
}

Eigen::MatrixXcd effective_matrix_bond(const Tensor& left, const Tensor& right) {
  if (left.extent(1) != right.extent(1)) throw DimensionError("effective_matrix_bond: inconsistent shapes");
  const std::size_t dw = left.extent(1), a = left.extent(0), b = right.extent(0);
  const std::size_t n = a * b;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const cplx* lp = left.data();
  const cplx* rp = right.data();
  for (std::size_t x = 0; x < dw; ++x)
    for (std::size_t i = 0; i < a; ++i)
      for (std::size_t ip = 0; ip < a; ++ip) {
        const cplx lv = lp[(i * dw + x) * a + ip];
        if (lv == cplx{}) continue;
        for (std::size_t j = 0; j < b; ++j)
          for (std::size_t jp = 0; jp < b; ++jp)
            m(static_cast<Eigen::Index>(i * b + j), static_cast<Eigen::Index>(ip * b + jp)) += lv * rp[(j * dw + x) * b + jp];
      }
  return m;
}

Eigen::MatrixXcd effective_matrix_two_site(const Tensor& left, const Tensor& w1, const Tensor& w2,
                                           const Tensor& right) {
  if (left.extent(1) != w1.extent(2) || w1.extent(3) != w2.extent(2) || right.extent(1) != w2.extent(3) ||
      w1.extent(0) != w1.extent(1) || w2.extent(0) != w2.extent(1))
    throw DimensionError("effective_matrix_two_site: inconsistent shapes");
  const std::size_t d1 = w1.extent(0), d2 = w2.extent(0);
  const std::size_t dl = w1.extent(2), dm = w1.extent(3), dr = w2.extent(3);
  const std::size_t a = left.extent(0), c = right.extent(0);
  const std::size_t n = d1 * d2 * a * c;
  // Pair operator on the two physical legs, one block per (left, right) MPO bond.
  Tensor ww({d1, d1, d2, d2, dl, dr});
  const cplx* p1 = w1.data();
  const cplx* p2 = w2.data();
  for (std::size_t s1 = 0; s1 < d1; ++s1)
    for (std::size_t t1 = 0; t1 < d1; ++t1)
      for (std::size_t x = 0; x < dl; ++x)
        for (std::size_t u = 0; u < dm; ++u) {
          const cplx v1 = p1[((s1 * d1 + t1) * dl + x) * dm + u];
          if (v1 == cplx{}) continue;
          for (std::size_t s2 = 0; s2 < d2; ++s2)
            for (std::size_t t2 = 0; t2 < d2; ++t2)
              for (std::size_t y = 0; y < dr; ++y) ww(s1, t1, s2, t2, x, y) += v1 * p2[((s2 * d2 + t2) * dm + u) * dr + y];
        }
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const cplx* lp = left.data();
  const cplx* rp = right.data();
  const cplx* wp = ww.data();
  std::size_t idx = 0;
  for (std::size_t s1 = 0; s1 < d1; ++s1)
    for (std::size_t t1 = 0; t1 < d1; ++t1)
      for (std::size_t s2 = 0; s2 < d2; ++s2)
        for (std::size_t t2 = 0; t2 < d2; ++t2)
          for (std::size_t x = 0; x < dl; ++x)
            for (std::size_t y = 0; y < dr; ++y, ++idx) {
              const cplx wv = wp[idx];
              if (wv == cplx{}) continue;
              const std::size_t row0 = (s1 * d2 + s2) * a, col0 = (t1 * d2 + t2) * a;
              for (std::size_t i = 0; i < a; ++i)
                for (std::size_t ip = 0; ip < a; ++ip) {
                  const cplx lv = wv * lp[(i * dl + x) * a + ip];
                  if (lv == cplx{}) continue;
                  for (std::size_t j = 0; j < c; ++j)
                    for (std::size_t jp = 0; jp < c; ++jp)
                      m(static_cast<Eigen::Index>((row0 + i) * c + j), static_cast<Eigen::Index>((col0 + ip) * c + jp)) +=
                          lv * rp[(j * dr + y) * c + jp];
                }
            }
  return m;
}

Mps tdvp_step(Mps psi, const Mpo& h, double dt, const TdvpConfig& cfg, TdvpMode mode) {
  validate_tdvp_config(cfg);
  if (psi.center() != std::optional<std::size_t>{0})
    throw PreconditionError("tdvp: state must be right-canonical with center at site 0");
  EnvironmentCache env = build_environments(psi, h);
  const std::size_t length = psi.length();
  Sweeper sw{h, cfg, psi.sites(), std::move(env), length, psi.phys_dim(), psi.bond_dims()};

  bool global_two = false;
  if (mode == TdvpMode::dynamic && cfg.global_switch)
    for (std::size_t b = 1; b < length; ++b) global_two = global_two || sw.sites[b].extent(1) < cfg.chi_max;

  if (length == 1) {
    sw.sites[0] = sw.evolve_site(0, sw.sites[0], cplx{0.0, -dt});
    return Mps(std::move(sw.sites), 0);
  }
  sw.left_to_right(0.5 * dt, mode, global_two);
  sw.right_to_left(0.5 * dt, mode, global_two);
  return Mps(std::move(sw.sites), 0);
}

}  // namespace tjm
