#include "frameflow/registry.hpp"

#include <cmath>
#include <sstream>

namespace frameflow {

namespace manifolds {

ChartManifold euclidean(int n) {
  if (n < 1) throw ConfigError("euclidean(n) needs n >= 1");
  MetricFn g = [n](const Vec&) { return Mat::Identity(n, n); };
  ChristoffelFn gamma = [n](const Vec&) { return Christoffel(n, Mat::Zero(n, n)); };
  return ChartManifold(n, g, nullptr, gamma, 1e-5,
                       "euclidean(" + std::to_string(n) + ")");
}

ChartManifold sphere(double r) {
  if (r <= 0) throw ConfigError("sphere(r) needs r > 0");
  constexpr double pole_margin = 1e-3;
  MetricFn g = [r](const Vec& x) {
    Mat m = Mat::Zero(2, 2);
    const double s = std::sin(x(0));
    m(0, 0) = r * r;
    m(1, 1) = r * r * s * s;
    return m;
  };
  DomainFn dom = [](const Vec& x) {
    return x(0) > pole_margin && x(0) < M_PI - pole_margin;
  };
  ChristoffelFn gamma = [](const Vec& x) {
    const double th = x(0);
    Christoffel G(2, Mat::Zero(2, 2));
    G[0](1, 1) = -std::sin(th) * std::cos(th);
    G[1](0, 1) = G[1](1, 0) = std::cos(th) / std::sin(th);
    return G;
  };
  std::ostringstream name;
  name << "sphere(" << r << ")";
  return ChartManifold(2, g, dom, gamma, 1e-5, name.str());
}

ChartManifold ellipsoid(double a, double b, double c) {
  if (a <= 0 || b <= 0 || c <= 0) throw ConfigError("ellipsoid needs positive axes");
  constexpr double pole_margin = 1e-3;
  manifolds::EmbeddingFn emb = [a, b, c](const Vec& x) {
    const double th = x(0), ph = x(1);
    return Eigen::Vector3d(a * std::sin(th) * std::cos(ph),
                           b * std::sin(th) * std::sin(ph), c * std::cos(th));
  };
  manifolds::EmbeddingJacobianFn jac = [a, b, c](const Vec& x) {
    const double th = x(0), ph = x(1);
    Eigen::Matrix<double, 3, 2> J;
    J.col(0) << a * std::cos(th) * std::cos(ph), b * std::cos(th) * std::sin(ph),
        -c * std::sin(th);
    J.col(1) << -a * std::sin(th) * std::sin(ph), b * std::sin(th) * std::cos(ph), 0.0;
    return J;
  };
  manifolds::EmbeddingHessianFn hess = [a, b, c](const Vec& x) {
    const double th = x(0), ph = x(1);
    std::array<std::array<Eigen::Vector3d, 2>, 2> H;
    H[0][0] = Eigen::Vector3d(-a * std::sin(th) * std::cos(ph),
                              -b * std::sin(th) * std::sin(ph), -c * std::cos(th));
    H[0][1] = Eigen::Vector3d(-a * std::cos(th) * std::sin(ph),
                              b * std::cos(th) * std::cos(ph), 0.0);
    H[1][0] = H[0][1];
    H[1][1] = Eigen::Vector3d(-a * std::sin(th) * std::cos(ph),
                              -b * std::sin(th) * std::sin(ph), 0.0);
    return H;
  };
  DomainFn dom = [](const Vec& x) {
    return x(0) > pole_margin && x(0) < M_PI - pole_margin;
  };
  std::ostringstream name;
  name << "ellipsoid(" << a << "," << b << "," << c << ")";
  return embedded_surface(emb, jac, hess, dom, name.str());
}

ChartManifold flat_torus(double Lx, double Ly) {
  if (Lx <= 0 || Ly <= 0) throw ConfigError("flat-torus needs positive periods");
  MetricFn g = [](const Vec&) { return Mat::Identity(2, 2); };
  ChristoffelFn gamma = [](const Vec&) { return Christoffel(2, Mat::Zero(2, 2)); };
  std::ostringstream name;
  name << "flat-torus(" << Lx << "," << Ly << ")";
  return ChartManifold(2, g, nullptr, gamma, 1e-5, name.str());
}

ChartManifold hyperbolic_halfplane() {
  MetricFn g = [](const Vec& x) {
    const double y = x(1);
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = 1.0 / (y * y);
    m(1, 1) = 1.0 / (y * y);
    return m;
  };
  DomainFn dom = [](const Vec& x) { return x(1) > 1e-9; };
  ChristoffelFn gamma = [](const Vec& x) {
    const double y = x(1);
    Christoffel G(2, Mat::Zero(2, 2));
    G[0](0, 1) = G[0](1, 0) = -1.0 / y;
    G[1](0, 0) = 1.0 / y;
    G[1](1, 1) = -1.0 / y;
    return G;
  };
  return ChartManifold(2, g, dom, gamma, 1e-5, "hyperbolic-halfplane");
}

ChartManifold embedded_surface(EmbeddingFn embedding, EmbeddingJacobianFn jacobian,
                               EmbeddingHessianFn hessian, DomainFn domain,
                               std::string name) {
  if (!embedding) throw ConfigError("embedded_surface needs an embedding");
  EmbeddingJacobianFn jac = jacobian;
  if (!jac) {
    jac = [embedding](const Vec& x) {
      const double h = 1e-6;
      Eigen::Matrix<double, 3, 2> J;
      for (int i = 0; i < 2; ++i) {
        Vec xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        J.col(i) = (embedding(xp) - embedding(xm)) / (2.0 * h);
      }
      return J;
    };
  }
  EmbeddingHessianFn hess = hessian;
  if (!hess) {
    hess = [jac](const Vec& x) {
      const double h = 1e-5;
      std::array<std::array<Eigen::Vector3d, 2>, 2> H;
      for (int j = 0; j < 2; ++j) {
        Vec xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        Eigen::Matrix<double, 3, 2> dJ = (jac(xp) - jac(xm)) / (2.0 * h);
        for (int i = 0; i < 2; ++i) H[i][j] = dJ.col(i);
      }
      return H;
    };
  }
  MetricFn g = [jac](const Vec& x) {
    Eigen::Matrix<double, 3, 2> J = jac(x);
    Mat m = (J.transpose() * J).eval();
    return m;
  };
  // Gauss formula: Gamma^k_ij = g^{kl} <dd_ij P, d_l P>
  ChristoffelFn gamma = [jac, hess, g](const Vec& x) {
    Eigen::Matrix<double, 3, 2> J = jac(x);
    auto H = hess(x);
    Mat gm = g(x);
    Mat ginv = gm.llt().solve(Mat::Identity(2, 2));
    Christoffel G(2, Mat::Zero(2, 2));
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          double s = 0.0;
          for (int l = 0; l < 2; ++l) s += ginv(k, l) * H[i][j].dot(J.col(l));
          G[k](i, j) = s;
        }
    return G;
  };
  return ChartManifold(2, g, std::move(domain), gamma, 1e-5, std::move(name));
}

}  // namespace manifolds

namespace {

std::vector<double> parse_params(const std::string& spec, std::string& key) {
  const auto open = spec.find('(');
  std::vector<double> params;
  if (open == std::string::npos) {
    key = spec;
    return params;
  }
  key = spec.substr(0, open);
  const auto close = spec.rfind(')');
  if (close == std::string::npos || close < open)
    throw ConfigError("malformed manifold spec: " + spec);
  std::string inner = spec.substr(open + 1, close - open - 1);
  std::stringstream ss(inner);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      params.push_back(std::stod(tok));
    } catch (...) {
      throw ConfigError("bad numeric parameter '" + tok + "' in " + spec);
    }
  }
  return params;
}

}  // namespace

std::vector<std::string> registry_keys() {
  return {"euclidean(n)", "sphere(r)", "ellipsoid(a,b,c)", "flat-torus(Lx,Ly)",
          "hyperbolic-halfplane"};
}

ChartManifold make_manifold(const std::string& spec) {
  std::string key;
  std::vector<double> p = parse_params(spec, key);
  auto arity = [&](std::size_t lo, std::size_t hi) {
    if (p.size() < lo || p.size() > hi)
      throw ConfigError("wrong number of parameters in manifold spec: " + spec);
  };
  if (key == "euclidean") {
    arity(1, 1);
    return manifolds::euclidean(static_cast<int>(p[0]));
  }
  if (key == "sphere") {
    arity(0, 1);
    return manifolds::sphere(p.empty() ? 1.0 : p[0]);
  }
  if (key == "ellipsoid") {
    arity(3, 3);
    return manifolds::ellipsoid(p[0], p[1], p[2]);
  }
  if (key == "flat-torus") {
    arity(0, 2);
    return manifolds::flat_torus(p.size() > 0 ? p[0] : 1.0, p.size() > 1 ? p[1] : 1.0);
  }
  if (key == "hyperbolic-halfplane") {
    arity(0, 0);
    return manifolds::hyperbolic_halfplane();
  }
  std::ostringstream os;
  os << "unknown manifold '" << key << "'; registry keys:";
  for (const auto& k : registry_keys()) os << " " << k;
  throw ConfigError(os.str());
}

}  // namespace frameflow
