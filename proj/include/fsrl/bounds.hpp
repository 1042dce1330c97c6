#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace fsrl {

// Inputs of the generalization-bound calculators. Rademacher complexities and the
// distribution gap are estimates supplied by the caller.
struct BoundInputs {
    double lambda_c = 0.5;  // weight of the novel risk, [0, 1)
    double lambda_g = 0.5;  // weight of the augmented risk, [0, 1)
    double delta = 0.05;    // confidence, (0, 1)
    double n_base = 1000;
    double n_novel = 50;
    double n_real = 100;
    double k_e = 3;         // augmented samples per real sample, > 1
    double rademacher_base = 0.1;
    double rademacher_novel = 0.1;
    double rademacher_real = 0.1;
    double rademacher_aug = 0.05;
    double gamma_gap = 0.0;
    double empirical_risk = 0.0;

    void validate() const;
};

// sqrt(ln(4/delta) / (2n))
double confidence_term(double delta, double n);

// Bound on the target risk of a model trained on a base/novel mixture.
double lemma1_bound(const BoundInputs& in);

// (1 - lambda_c) gamma + 2 lambda_c R_novel + 4 lambda_c sqrt(ln(4/delta) / (2 N_novel)).
double theorem1_approx(const BoundInputs& in);
// d theorem1_approx / d lambda_c.
double theorem1_slope(const BoundInputs& in);

// Bound with real and augmented samples mixed by lambda_g, N_aug = k_e * N_real.
double proposition1_bound(const BoundInputs& in);

struct Theorem2Result {
    double sup_with = 0.0;      // augmented bound with zero empirical risk and zero gap
    double intermediate = 0.0;  // 2 R_r + 3 s_r + sqrt(ln(4/delta)/2 * ((1-lg)^2 + lg^2/k_e) / N_r)
    double sup_without = 0.0;   // 2 R_r + 4 s_r
    bool holds = false;         // sup_with < sup_without
};
Theorem2Result theorem2_compare(const BoundInputs& in);

enum class Formula { Lemma1, Theorem1, Proposition1, Theorem2 };
Formula parse_formula(const std::string& name);
const char* to_string(Formula formula);

// Field access by name ("lambda_c", "n_real", ...), used by parameter files and sweeps.
const std::vector<std::string>& bound_field_names();
void set_bound_field(BoundInputs& in, const std::string& name, double value);
double get_bound_field(const BoundInputs& in, const std::string& name);
BoundInputs bounds_from_json(const nlohmann::json& j, BoundInputs base = {});
nlohmann::ordered_json bounds_to_json(const BoundInputs& in);
BoundInputs load_bound_inputs(const std::filesystem::path& path);

// Value(s) of a formula as named columns: "value", or "sup_with", "intermediate", "sup_without", "holds".
std::vector<std::pair<std::string, double>> evaluate_formula(Formula formula, const BoundInputs& in);

// Cartesian product of per-field value lists on top of `base`; the first axis varies slowest.
struct SweepAxis {
    std::string field;
    std::vector<double> values;
};
std::vector<BoundInputs> sweep_grid(const BoundInputs& base, const std::vector<SweepAxis>& axes);
// CSV with one column per input field followed by the formula's output columns.
std::string sweep_csv(Formula formula, const std::vector<BoundInputs>& points);

// k_e in {2..10}, delta = 0.05, N_real in {10..1000}, R_real = 0.1, R_aug = 0.05, lambda_g = 0.5.
std::vector<BoundInputs> theorem2_default_grid();

enum class MonotonicityKind {
    Theorem1LambdaC,     // increasing in lambda_c when -gamma + 2 R_n + 4 s_n > 0
    Proposition1Augment, // decreasing in k_e when lambda_g > 0
};
MonotonicityKind parse_monotonicity_kind(const std::string& name);

struct MonotonicityGrid {
    std::vector<double> lambdas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99};
    std::vector<double> gammas{0.0, 0.05, 0.2, 0.5, 1.0, 2.0};
    std::vector<double> rademachers{0.0, 0.01, 0.1, 0.5};
    std::vector<double> sample_sizes{5, 10, 50, 100, 1000, 10000};
    std::vector<double> deltas{0.01, 0.05, 0.1};
    std::vector<double> k_es{1.5, 2, 3, 5, 10, 100};
};

struct MonotonicityCase {
    BoundInputs inputs;   // the fixed fields of one curve
    double slope = 0.0;   // analytic derivative sign carrier
    bool inside_condition = false;
    std::string detail;
};

struct MonotonicityReport {
    MonotonicityKind kind{};
    int curves = 0;
    int inside = 0;            // curves satisfying the condition
    int outside = 0;           // curves violating it
    int outside_consistent = 0;  // of those, curves following the analytic derivative sign
    std::vector<MonotonicityCase> counterexamples;  // curves inside the condition that are not monotone
};
MonotonicityReport monotonicity_check(MonotonicityKind kind, const MonotonicityGrid& grid = {});
nlohmann::ordered_json report_to_json(const MonotonicityReport& report);

}  // namespace fsrl
