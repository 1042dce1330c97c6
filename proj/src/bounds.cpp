#include "fsrl/bounds.hpp"

#include "fsrl/errors.hpp"
#include "fsrl/matrix_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fsrl {

namespace {

struct BoundField {
    const char* name;
    double BoundInputs::*member;
};

constexpr BoundField kFields[] = {
    {"lambda_c", &BoundInputs::lambda_c},
    {"lambda_g", &BoundInputs::lambda_g},
    {"delta", &BoundInputs::delta},
    {"n_base", &BoundInputs::n_base},
    {"n_novel", &BoundInputs::n_novel},
    {"n_real", &BoundInputs::n_real},
    {"k_e", &BoundInputs::k_e},
    {"rademacher_base", &BoundInputs::rademacher_base},
    {"rademacher_novel", &BoundInputs::rademacher_novel},
    {"rademacher_real", &BoundInputs::rademacher_real},
    {"rademacher_aug", &BoundInputs::rademacher_aug},
    {"gamma_gap", &BoundInputs::gamma_gap},
    {"empirical_risk", &BoundInputs::empirical_risk},
};

const BoundField& find(const std::string& name) {
    for (const auto& f : kFields)
        if (name == f.name) return f;
    throw ValidationError("unknown bound parameter '" + name + "'");
}

void require_count(double n, const char* name) {
    if (!(n >= 1.0) || !std::isfinite(n) || std::floor(n) != n)
        throw ValidationError(std::string(name) + " must be a positive integer");
}

void require_nonnegative(double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(std::string(name) + " must be finite and non-negative");
}

// The mixed confidence term shared by the two mixture bounds.
double mixed_term(double delta, double weight, double n_first, double n_second) {
    return std::sqrt(std::log(4.0 / delta) / 2.0 *
                     ((1.0 - weight) * (1.0 - weight) / n_first + weight * weight / n_second));
}

bool strictly_increasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] > v[i - 1])) return false;
    return true;
}

bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) return false;
    return true;
}

bool constant(const std::vector<double>& v) {
    for (double x : v)
        if (x != v.front()) return false;
    return true;
}

std::vector<double> sorted(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace

void BoundInputs::validate() const {
    if (!(lambda_c >= 0.0 && lambda_c < 1.0)) throw ValidationError("lambda_c must lie in [0, 1)");
    if (!(lambda_g >= 0.0 && lambda_g < 1.0)) throw ValidationError("lambda_g must lie in [0, 1)");
    if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
    require_count(n_base, "n_base");
    require_count(n_novel, "n_novel");
    require_count(n_real, "n_real");
    if (!(k_e > 1.0) || !std::isfinite(k_e)) throw ValidationError("k_e must be finite and greater than 1");
    require_nonnegative(rademacher_base, "rademacher_base");
    require_nonnegative(rademacher_novel, "rademacher_novel");
    require_nonnegative(rademacher_real, "rademacher_real");
    require_nonnegative(rademacher_aug, "rademacher_aug");
    require_nonnegative(gamma_gap, "gamma_gap");
    require_nonnegative(empirical_risk, "empirical_risk");
}

double confidence_term(double delta, double n) { return std::sqrt(std::log(4.0 / delta) / (2.0 * n)); }

double lemma1_bound(const BoundInputs& in) {
    in.validate();
    const double lc = in.lambda_c;
    const double sb = confidence_term(in.delta, in.n_base);
    const double sn = confidence_term(in.delta, in.n_novel);
    return in.empirical_risk + (1.0 - lc) * in.gamma_gap + 2.0 * (1.0 - lc) * in.rademacher_base +
           3.0 * (1.0 - lc) * sb + 2.0 * lc * in.rademacher_novel + 3.0 * lc * sn +
           mixed_term(in.delta, lc, in.n_base, in.n_novel);
}

double theorem1_approx(const BoundInputs& in) {
    in.validate();
    const double lc = in.lambda_c;
    return (1.0 - lc) * in.gamma_gap + 2.0 * lc * in.rademacher_novel + 4.0 * lc * confidence_term(in.delta, in.n_novel);
}

double theorem1_slope(const BoundInputs& in) {
    in.validate();
    return -in.gamma_gap + 2.0 * in.rademacher_novel + 4.0 * confidence_term(in.delta, in.n_novel);
}

double proposition1_bound(const BoundInputs& in) {
    in.validate();
    const double lg = in.lambda_g;
    const double n_aug = in.k_e * in.n_real;
    const double sr = confidence_term(in.delta, in.n_real);
    const double se = confidence_term(in.delta, n_aug);
    return in.empirical_risk + (1.0 - lg) * in.gamma_gap + 2.0 * (1.0 - lg) * in.rademacher_real +
           3.0 * (1.0 - lg) * sr + 2.0 * lg * in.rademacher_aug + 3.0 * lg * se +
           mixed_term(in.delta, lg, in.n_real, n_aug);
}

Theorem2Result theorem2_compare(const BoundInputs& in) {
    in.validate();
    BoundInputs converged = in;
    converged.empirical_risk = 0.0;
    converged.gamma_gap = 0.0;
    const double lg = in.lambda_g;
    const double sr = confidence_term(in.delta, in.n_real);
    Theorem2Result r;
    r.sup_with = proposition1_bound(converged);
    r.intermediate = 2.0 * in.rademacher_real + 3.0 * sr +
                     std::sqrt(std::log(4.0 / in.delta) / 2.0 * (((1.0 - lg) * (1.0 - lg) + lg * lg / in.k_e) / in.n_real));
    r.sup_without = 2.0 * in.rademacher_real + 4.0 * sr;
    r.holds = r.sup_with < r.sup_without;
    return r;
}

Formula parse_formula(const std::string& name) {
    if (name == "lemma1") return Formula::Lemma1;
    if (name == "thm1") return Formula::Theorem1;
    if (name == "prop1") return Formula::Proposition1;
    if (name == "thm2") return Formula::Theorem2;
    throw ValidationError("unknown formula '" + name + "' (expected lemma1, thm1, prop1 or thm2)");
}

const char* to_string(Formula formula) {
    switch (formula) {
        case Formula::Lemma1: return "lemma1";
        case Formula::Theorem1: return "thm1";
        case Formula::Proposition1: return "prop1";
        case Formula::Theorem2: return "thm2";
    }
    return "?";
}

const std::vector<std::string>& bound_field_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& f : kFields) v.emplace_back(f.name);
        return v;
    }();
    return names;
}

void set_bound_field(BoundInputs& in, const std::string& name, double value) { in.*find(name).member = value; }

double get_bound_field(const BoundInputs& in, const std::string& name) { return in.*find(name).member; }

BoundInputs bounds_from_json(const nlohmann::json& j, BoundInputs base) {
    if (!j.is_object()) throw ValidationError("bound parameters must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!it.value().is_number()) throw ValidationError("bound parameter '" + it.key() + "' must be a number");
        set_bound_field(base, it.key(), it.value().get<double>());
    }
    base.validate();
    return base;
}

nlohmann::ordered_json bounds_to_json(const BoundInputs& in) {
    nlohmann::ordered_json j;
    for (const auto& f : kFields) j[f.name] = in.*f.member;
    return j;
}

BoundInputs load_bound_inputs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open parameters " + path.string());
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ValidationError(path.string() + " is not valid JSON");
    return bounds_from_json(j);
}

std::vector<std::pair<std::string, double>> evaluate_formula(Formula formula, const BoundInputs& in) {
    switch (formula) {
        case Formula::Lemma1: return {{"value", lemma1_bound(in)}};
        case Formula::Theorem1: return {{"value", theorem1_approx(in)}};
        case Formula::Proposition1: return {{"value", proposition1_bound(in)}};
        case Formula::Theorem2: {
            const Theorem2Result r = theorem2_compare(in);
            return {{"sup_with", r.sup_with},
                    {"intermediate", r.intermediate},
                    {"sup_without", r.sup_without},
                    {"holds", r.holds ? 1.0 : 0.0}};
        }
    }
    return {};
}

std::vector<BoundInputs> sweep_grid(const BoundInputs& base, const std::vector<SweepAxis>& axes) {
    std::vector<BoundInputs> points{base};
    for (const auto& axis : axes) {
        find(axis.field);
        if (axis.values.empty()) throw ValidationError("sweep axis '" + axis.field + "' has no values");
        std::vector<BoundInputs> next;
        next.reserve(points.size() * axis.values.size());
        for (const auto& p : points) {
            for (double v : axis.values) {
                BoundInputs q = p;
                set_bound_field(q, axis.field, v);
                next.push_back(q);
            }
        }
        points = std::move(next);
    }
    for (const auto& p : points) p.validate();
    return points;
}

std::string sweep_csv(Formula formula, const std::vector<BoundInputs>& points) {
    std::ostringstream out;
    const auto header = evaluate_formula(formula, BoundInputs{});
    for (const auto& f : kFields) out << f.name << ',';
    for (std::size_t i = 0; i < header.size(); ++i) out << header[i].first << (i + 1 < header.size() ? "," : "\n");
    for (const auto& p : points) {
        for (const auto& f : kFields) out << format_double(p.*f.member) << ',';
        const auto cols = evaluate_formula(formula, p);
        for (std::size_t i = 0; i < cols.size(); ++i)
            out << format_double(cols[i].second) << (i + 1 < cols.size() ? "," : "\n");
    }
    return out.str();
}

std::vector<BoundInputs> theorem2_default_grid() {
    BoundInputs base;
    base.delta = 0.05;
    base.lambda_g = 0.5;
    base.rademacher_real = 0.1;
    base.rademacher_aug = 0.05;
    std::vector<double> k_es;
    for (int k = 2; k <= 10; ++k) k_es.push_back(k);
    return sweep_grid(base, {{"k_e", k_es}, {"n_real", {10, 20, 50, 100, 200, 500, 1000}}});
}

MonotonicityKind parse_monotonicity_kind(const std::string& name) {
    if (name == "thm1-lambda-c") return MonotonicityKind::Theorem1LambdaC;
    if (name == "prop1-k-e") return MonotonicityKind::Proposition1Augment;
    throw ValidationError("unknown monotonicity check '" + name + "' (expected thm1-lambda-c or prop1-k-e)");
}

MonotonicityReport monotonicity_check(MonotonicityKind kind, const MonotonicityGrid& grid) {
    MonotonicityReport report;
    report.kind = kind;
    auto record = [&](const BoundInputs& fixed, double slope, bool inside, const std::vector<double>& curve,
                      bool monotone_inside, bool consistent_outside) {
        ++report.curves;
        if (inside) {
            ++report.inside;
            if (!monotone_inside) {
                std::ostringstream d;
                d << "values:";
                for (double v : curve) d << ' ' << format_double(v);
                report.counterexamples.push_back({fixed, slope, true, d.str()});
            }
        } else {
            ++report.outside;
            report.outside_consistent += consistent_outside;
        }
    };

    if (kind == MonotonicityKind::Theorem1LambdaC) {
        const auto lambdas = sorted(grid.lambdas);
        for (double gamma : grid.gammas) {
            for (double r : grid.rademachers) {
                for (double n : grid.sample_sizes) {
                    for (double delta : grid.deltas) {
                        BoundInputs in;
                        in.gamma_gap = gamma;
                        in.rademacher_novel = r;
                        in.n_novel = n;
                        in.delta = delta;
                        in.lambda_c = 0.0;
                        const double slope = theorem1_slope(in);
                        std::vector<double> curve;
                        for (double l : lambdas) {
                            in.lambda_c = l;
                            curve.push_back(theorem1_approx(in));
                        }
                        in.lambda_c = 0.0;
                        const bool consistent = slope < 0.0 ? strictly_decreasing(curve) : constant(curve);
                        record(in, slope, slope > 0.0, curve, strictly_increasing(curve), consistent);
                    }
                }
            }
        }
    } else {
        const auto k_es = sorted(grid.k_es);
        for (double lg : grid.lambdas) {
            for (double r : grid.rademachers) {
                for (double n : grid.sample_sizes) {
                    for (double delta : grid.deltas) {
                        BoundInputs in;
                        in.lambda_g = lg;
                        in.rademacher_real = r;
                        in.rademacher_aug = r / 2.0;
                        in.n_real = n;
                        in.delta = delta;
                        std::vector<double> curve;
                        for (double k : k_es) {
                            in.k_e = k;
                            curve.push_back(proposition1_bound(in));
                        }
                        in.k_e = k_es.front();
                        record(in, lg, lg > 0.0, curve, strictly_decreasing(curve), constant(curve));
                    }
                }
            }
        }
    }
    return report;
}

nlohmann::ordered_json report_to_json(const MonotonicityReport& report) {
    nlohmann::ordered_json j;
    j["check"] = report.kind == MonotonicityKind::Theorem1LambdaC ? "thm1-lambda-c" : "prop1-k-e";
    j["curves"] = report.curves;
    j["inside_condition"] = report.inside;
    j["outside_condition"] = report.outside;
    j["outside_following_derivative_sign"] = report.outside_consistent;
    j["counterexamples"] = nlohmann::ordered_json::array();
    for (const auto& c : report.counterexamples) {
        nlohmann::ordered_json e;
        e["inputs"] = bounds_to_json(c.inputs);
        e["slope"] = c.slope;
        e["detail"] = c.detail;
        j["counterexamples"].push_back(e);
    }
    return j;
}

}  // namespace fsrl
