#include "mikado/frequency.hpp"

#include <cmath>

namespace mikado {

namespace mp = boost::multiprecision;

static BigInt ipow(long base, int e) {
    BigInt r = 1;
    for (int i = 0; i < e; ++i) r *= base;
    return r;
}

// smallest s >= 0 with s^2 * p >= Q
static BigInt ceil_root(const BigInt& Q, long long p) {
    BigInt s = mp::sqrt(BigInt(Q / p));
    while (s * s * p < Q) ++s;
    while (s > 0 && (s - 1) * (s - 1) * p >= Q) --s;
    return s;
}

bool check_containment(const FrequencyPlan& plan, const DirectionCatalog& cat) {
    const int d = cat.d;
    const BigInt& sg = plan.sigma;
    const BigInt lam = plan.lambda;
    BigInt hi = 9 * sg - 20 * lam;
    if (hi <= 0) return false;
    for (int i = 0; i < cat.size(); ++i) {
        long long p = 0;
        for (int a = 0; a < d; ++a) p += static_cast<long long>(cat.kperp[i][a]) * cat.kperp[i][a];
        BigInt A = plan.sigma_k[i] * plan.sigma_k[i] * p;  // |sigma_k k_perp|^2
        // |xi| - 2 lambda > sigma/2  and  |xi| + 2 lambda < 9 sigma / 10
        BigInt lo = sg + 4 * lam;
        if (!(4 * A > lo * lo)) return false;
        if (!(100 * A < hi * hi)) return false;
    }
    return true;
}

FrequencyPlan select_sigma(long lambda, int e, const DirectionCatalog& cat) {
    if (!is_dyadic(lambda) || lambda < 2) fail(ErrorKind::parameter, "lambda must be dyadic and >= 2");
    if (e < 1) fail(ErrorKind::parameter, "frequency exponent must be positive");
    FrequencyPlan plan;
    plan.lambda = lambda;
    plan.e = e;
    plan.c_lambda_sq = cat.c_lambda_sq;
    const BigInt c2 = cat.c_lambda_sq;
    const BigInt le = ipow(lambda, e);
    const BigInt b0 = 45 * le;
    // smallest power of two above (11/9) b0 c
    BigInt sigma = 1;
    while (!(121 * b0 * b0 * c2 < 81 * sigma * sigma)) sigma *= 2;
    bool found = false;
    for (int guard = 0; guard < 4096 && !found; ++guard, sigma *= 2) {
        // b range for this sigma: 25 sigma^2 < 81 b^2 c^2 and 121 b^2 c^2 < 81 sigma^2
        BigInt b = ceil_root(25 * sigma * sigma, 81 * cat.c_lambda_sq);
        if (81 * b * b * c2 <= 25 * sigma * sigma) ++b;
        if (b < b0) b = b0;
        if (121 * b * b * c2 < 81 * sigma * sigma && 25 * sigma * sigma < 81 * b * b * c2) {
            plan.b = b;
            plan.sigma = sigma;
            found = true;
            break;
        }
    }
    if (!found) fail(ErrorKind::internal, "sigma search did not terminate");
    const BigInt Q = plan.b * plan.b * c2;
    for (int i = 0; i < cat.size(); ++i) {
        long long p = 0;
        for (int a = 0; a < cat.d; ++a) p += static_cast<long long>(cat.kperp[i][a]) * cat.kperp[i][a];
        plan.sigma_k.push_back(ceil_root(Q, p));
    }
    plan.sigma_gt_50 = plan.sigma > 50 * le;
    plan.b_ge_45 = plan.b >= b0;
    plan.interval = 121 * Q < 81 * plan.sigma * plan.sigma && 25 * plan.sigma * plan.sigma < 81 * Q;
    plan.containment = check_containment(plan, cat);
    return plan;
}

int e_from_theta(double theta) {
    if (!(theta > 0 && theta < 1)) fail(ErrorKind::parameter, "theta must lie in (0, 1)");
    // guard against 1/theta landing a hair above an integer
    double inv = 1.0 / theta;
    double c = std::ceil(inv - 1e-12 * inv);
    return 2 * static_cast<int>(c);
}

bool is_power_of_four(long n) { return is_dyadic(n) && (__builtin_ctzl(static_cast<unsigned long>(n)) % 2 == 0); }

bool ParameterAudit::all_pass() const {
    for (const auto& r : rows)
        if (!r.pass) return false;
    return plan.valid();
}

ParameterAudit audit_parameters(long lambda, double p, double theta, int d, double alpha) {
    if (d != 2 && d != 3) fail(ErrorKind::unsupported, "d must be 2 or 3");
    if (!(p > 1 && p < 2) || (1.0 / p - 0.5) > 1.0 / (d - 1) + 1e-15)
        fail(ErrorKind::parameter, "p must lie in (1,2) with 1/p - 1/2 <= 1/(d-1)");
    if (!is_power_of_four(lambda) || lambda < 4) fail(ErrorKind::parameter, "lambda must be a power of 4");
    if (!(alpha > 0)) fail(ErrorKind::parameter, "alpha must be positive");
    ParameterAudit a;
    a.e = e_from_theta(theta);
    a.eps = (2 - p) / 12;
    a.beta = p / (6.0 * (d - 1));
    a.mu = std::pow(double(lambda), a.beta);
    a.gamma = std::sqrt(double(lambda));
    a.s = d / 2.0 + 2 * alpha + 1;
    a.plan = select_sigma(lambda, a.e, build_catalog(d));

    // all quantities are powers of two: compare log2 exponents
    const double L = std::log2(double(lambda));
    const double S = mp::msb(a.plan.sigma);  // sigma is a power of two
    const double lg = 0.5 * L, lm = a.beta * L, le = -a.eps * L;
    const double h = 0.5 * (d - 1);  // h = (d-1)/2 in the row ids
    const double tol = 1e-12 * std::max(1.0, L + S);
    auto add = [&](const std::string& id, double lhs, double rhs) {
        a.rows.push_back({id, lhs, rhs, rhs - lhs, lhs <= rhs + tol});
    };
    add("gamma^-1<=mu^-1", -lg, -lm);
    add("mu^-1<=lambda^-eps", -lm, le);
    add("mu^((d-1)(1/2-1/p))<=lambda^-eps", lm * (d - 1) * (0.5 - 1.0 / p), le);
    add("lambda^-1*gamma*mu<=lambda^-1*gamma*mu^(1+h)", -L + lg + lm, -L + lg + lm * (1 + h));
    add("lambda^-1*gamma*mu^(1+h)<=lambda^-eps", -L + lg + lm * (1 + h), le);
    add("gamma^-s*mu^h<=lambda^-eps", -a.s * lg + h * lm, le);
    add("sigma^-s*mu^h<=sigma^-1*mu^h", -a.s * S + h * lm, -S + h * lm);
    add("sigma^-1*mu^h<=sigma^-theta*mu^h", -S + h * lm, -theta * S + h * lm);
    add("sigma^-theta*mu^h<=lambda^-eps", -theta * S + h * lm, le);
    return a;
}

}  // namespace mikado
