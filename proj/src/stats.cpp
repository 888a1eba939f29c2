#include "spreg/stats.hpp"

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace spreg {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double norm_quantile(double p) {
  // AS 241 (Wichura 1988), PPND16.
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  const double q = p - 0.5;
  double r;
  if (std::abs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) *
                    r +
                4.5921953931549871457e4) *
                   r +
               1.3731693765509461125e4) *
                  r +
              1.9715909503065514427e3) *
                 r +
             1.3314166789178437745e2) *
                r +
            3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) *
                    r +
                2.1213794301586595867e4) *
                   r +
               5.3941960214247511077e3) *
                  r +
              6.8718700749205790830e2) *
                 r +
             4.2313330701600911252e1) *
                r +
            1.0);
  }
  r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) *
                   r +
               1.27045825245236838258e0) *
                  r +
              3.64784832476320460504e0) *
                 r +
             5.76949722146069140550e0) *
                r +
            4.63033784615654529590e0) *
               r +
           1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) *
                   r +
               1.48103976427480074590e-1) *
                  r +
              6.89767334985100004550e-1) *
                 r +
             1.67638483018380384940e0) *
                r +
            2.05319162663775882187e0) *
               r +
           1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) *
                   r +
               2.65321895265761230930e-2) *
                  r +
              2.96560571828504891230e-1) *
                 r +
             1.78482653991729133580e0) *
                r +
            5.46378491116411436990e0) *
               r +
           6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) *
                   r +
               7.86869131145613259100e-4) *
                  r +
              1.48753612908506148525e-2) *
                 r +
             1.36929880922735805310e-1) *
                r +
            5.99832206555887937690e-1) *
               r +
           1.0);
  }
  return (q < 0.0) ? -val : val;
}

namespace {

// Gauss--Legendre abscissae/weights used by Genz's BVND.
constexpr double kW6[3] = {0.1713244923791704, 0.3607615730481386, 0.4679139345726910};
constexpr double kX6[3] = {-0.9324695142031521, -0.6612093864662645, -0.2386191860831969};
constexpr double kW12[6] = {0.04717533638651183, 0.1069393259953184, 0.1600783285433462,
                            0.2031674267230659,  0.2334925365383548, 0.2491470458134028};
constexpr double kX12[6] = {-0.9815606342467192, -0.9041172563704749, -0.7699026741943047,
                            -0.5873179542866175, -0.3678314989981802, -0.1252334085114689};
constexpr double kW20[10] = {0.01761400713915212, 0.04060142980038694, 0.06267204833410907,
                             0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
                             0.1316886384491766,  0.1420961093183820,  0.1491729864726037,
                             0.1527533871307258};
constexpr double kX20[10] = {-0.9931285991850949, -0.9639719272779138, -0.9122344282513259,
                             -0.8391169718222188, -0.7463319064601508, -0.6360536807265150,
                             -0.5108670019508271, -0.3737060887154195, -0.2277858511416451,
                             -0.07652652113349733};

// Genz's BVND: P(X > dh, Y > dk) for standard bivariate normal, correlation r.
double bvnd(double dh, double dk, double r) {
  const double twopi = 2.0 * std::numbers::pi;
  const double* w;
  const double* x;
  int ng;
  if (std::abs(r) < 0.3) {
    w = kW6;
    x = kX6;
    ng = 3;
  } else if (std::abs(r) < 0.75) {
    w = kW12;
    x = kX12;
    ng = 6;
  } else {
    w = kW20;
    x = kX20;
    ng = 10;
  }
  double h = dh, k = dk;
  double hk = h * k;
  double bvn = 0.0;
  if (std::abs(r) < 0.925) {
    if (std::abs(r) > 0.0) {
      const double hs = (h * h + k * k) / 2.0;
      const double asr = std::asin(r);
      for (int i = 0; i < ng; ++i) {
        for (int is = -1; is <= 1; is += 2) {
          const double sn = std::sin(asr * (is * x[i] + 1.0) / 2.0);
          bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
        }
      }
      bvn = bvn * asr / (2.0 * twopi);
    }
    bvn += norm_cdf(-h) * norm_cdf(-k);
  } else {
    if (r < 0.0) {
      k = -k;
      hk = -hk;
    }
    if (std::abs(r) < 1.0) {
      const double as = (1.0 - r) * (1.0 + r);
      double a = std::sqrt(as);
      const double bs = (h - k) * (h - k);
      const double c = (4.0 - hk) / 8.0;
      const double d = (12.0 - hk) / 16.0;
      double asr = -(bs / as + hk) / 2.0;
      if (asr > -100.0) {
        bvn = a * std::exp(asr) *
              (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
      }
      if (-hk < 100.0) {
        const double b = std::sqrt(bs);
        const double sp = std::sqrt(twopi) * norm_cdf(-b / a);
        bvn -= std::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
      }
      a /= 2.0;
      for (int i = 0; i < ng; ++i) {
        for (int is = -1; is <= 1; is += 2) {
          const double xs = std::pow(a * (is * x[i] + 1.0), 2);
          const double rs = std::sqrt(1.0 - xs);
          asr = -(bs / xs + hk) / 2.0;
          if (asr > -100.0) {
            const double sp = 1.0 + c * xs * (1.0 + d * xs);
            const double ep = std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs;
            bvn += a * w[i] * std::exp(asr) * (ep - sp);
          }
        }
      }
      bvn = -bvn / twopi;
    }
    if (r > 0.0) {
      bvn += norm_cdf(-std::max(h, k));
    } else {
      bvn = -bvn;
      if (k > h) bvn += norm_cdf(k) - norm_cdf(h);
    }
  }
  return std::clamp(bvn, 0.0, 1.0);
}

}  // namespace

double bvn_cdf(double h, double k, double r) {
  if (std::abs(r) >= 1.0) throw std::invalid_argument("bvn_cdf: |r| must be < 1");
  if (std::isinf(h) || std::isinf(k)) {
    if (h == -std::numeric_limits<double>::infinity() ||
        k == -std::numeric_limits<double>::infinity())
      return 0.0;
    if (std::isinf(h)) return norm_cdf(k);
    return norm_cdf(h);
  }
  return bvnd(-h, -k, r);
}

double gamma_quantile(double p, double shape, double rate) {
  boost::math::gamma_distribution<double> g(shape, 1.0 / rate);
  return boost::math::quantile(g, p);
}

double t_pvalue_two_sided(double t, double df) {
  boost::math::students_t_distribution<double> dist(df);
  return 2.0 * boost::math::cdf(dist, -std::abs(t));
}

double z_pvalue_two_sided(double z) { return 2.0 * norm_cdf(-std::abs(z)); }

double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = p * (static_cast<double>(v.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double ma = a.mean(), mb = b.mean();
  const Eigen::VectorXd ca = a.array() - ma;
  const Eigen::VectorXd cb = b.array() - mb;
  return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("welch_t_test: each group needs at least 2 observations");
  const auto mean_var = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s2 = 0.0;
    for (double x : v) s2 += (x - m) * (x - m);
    s2 /= static_cast<double>(v.size() - 1);
    return std::pair<double, double>{m, s2};
  };
  const auto [ma, va] = mean_var(a);
  const auto [mb, vb] = mean_var(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double se2 = va / na + vb / nb;
  const double t = (ma - mb) / std::sqrt(se2);
  const double df =
      se2 * se2 / (va * va / (na * na * (na - 1.0)) + vb * vb / (nb * nb * (nb - 1.0)));
  return {t, df, t_pvalue_two_sided(t, df)};
}

}  // namespace spreg
