#pragma once

#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "mikado/nash.hpp"

namespace mikado {

using BigInt = boost::multiprecision::cpp_int;

struct FrequencyPlan {
    long lambda = 0;
    int e = 0;
    long long c_lambda_sq = 0;
    BigInt b;
    BigInt sigma;
    std::vector<BigInt> sigma_k;
    // exact verdicts
    bool sigma_gt_50 = false;
    bool b_ge_45 = false;
    bool interval = false;
    bool containment = false;
    bool valid() const { return sigma_gt_50 && b_ge_45 && interval && containment; }
};

FrequencyPlan select_sigma(long lambda, int e, const DirectionCatalog& cat);
bool check_containment(const FrequencyPlan& plan, const DirectionCatalog& cat);

int e_from_theta(double theta);
bool is_power_of_four(long n);

struct AuditRow {
    std::string id;
    double lhs;    // log2 of the left side
    double rhs;    // log2 of the right side
    double slack;  // rhs - lhs
    bool pass;
};

struct ParameterAudit {
    double eps, beta, mu, gamma, s;
    int e;
    FrequencyPlan plan;
    std::vector<AuditRow> rows;
    bool all_pass() const;
};

ParameterAudit audit_parameters(long lambda, double p, double theta, int d, double alpha);

}  // namespace mikado
