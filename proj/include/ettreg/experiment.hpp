#ifndef ETTREG_EXPERIMENT_HPP
#define ETTREG_EXPERIMENT_HPP

#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <sstream>
#include <thread>

#include "ettreg/config_json.hpp"
#include "ettreg/simulate.hpp"

namespace ettreg {

/// One parameter axis of a grid: a JSON pointer into the scenario config and
/// the values to sweep.
struct GridParam {
    std::string path;
    std::vector<json> values;
};

struct ExperimentSpec {
    json base_config;
    std::vector<GridParam> grid;
    std::vector<std::uint64_t> seeds{1,  2,  3,  4,  5,  6,  7,  8,  9,  10,
                                     11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
    double eta = 0.0;

    void validate() const {
        if (seeds.empty()) throw ConfigError("experiment needs seeds");
        for (const GridParam& p : grid) {
            if (p.values.empty()) {
                throw ConfigError("empty grid axis: " + p.path);
            }
        }
    }
};

inline ExperimentSpec experiment_from_json(const json& j) {
    ExperimentSpec spec;
    spec.base_config = j.at("base");
    if (j.contains("grid")) {
        for (const json& jp : j.at("grid")) {
            spec.grid.push_back(
                {jp.at("path").get<std::string>(),
                 std::vector<json>(jp.at("values").begin(), jp.at("values").end())});
        }
    }
    if (j.contains("seeds")) {
        spec.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    }
    spec.eta = j.value("eta", 0.0);
    spec.validate();
    return spec;
}

struct ExperimentRow {
    std::string policy;
    std::vector<std::pair<std::string, std::string>> params;  // path -> value
    double rho_min = 0.0;  // worst seed
    double m_mean = 0.0;
    double m_std = 0.0;
    bool feasible = false;
    long failures = 0;  // aborted runs (collisions, invalid cells)

    bool operator==(const ExperimentRow&) const = default;
};

namespace detail {

inline std::string json_value_text(const json& v) {
    if (v.is_number_float()) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", v.get<double>());
        return buf;
    }
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

inline ExperimentRow evaluate_cell(const json& config_json,
                                   const std::vector<std::uint64_t>& seeds,
                                   double eta) {
    ExperimentRow row;
    row.rho_min = std::numeric_limits<double>::infinity();
    std::vector<double> events;
    try {
        const ScenarioConfig config = scenario_from_json(config_json);
        row.policy = policy_kind_name(config.policy.kind);
        for (std::uint64_t seed : seeds) {
            try {
                const SimResult r = run_simulation(config, seed);
                row.rho_min = std::min(row.rho_min, r.rho_min_true);
                events.push_back(static_cast<double>(r.total_events));
            } catch (const CollisionError&) {
                row.failures += 1;
            }
        }
    } catch (const std::exception&) {
        // cell-level configuration failure: every run counts as failed
        row.policy = config_json.contains("policy")
                         ? config_json.at("policy").value("kind", "?")
                         : "?";
        row.failures = static_cast<long>(seeds.size());
    }
    if (!events.empty()) {
        const double n = static_cast<double>(events.size());
        row.m_mean = std::accumulate(events.begin(), events.end(), 0.0) / n;
        double var = 0.0;
        for (double m : events) var += (m - row.m_mean) * (m - row.m_mean);
        row.m_std = std::sqrt(var / n);
    }
    row.feasible = row.failures == 0 && row.rho_min > eta;
    if (!std::isfinite(row.rho_min)) row.rho_min = 0.0;
    return row;
}

} // namespace detail

/// Runs the cartesian product of the grid over all seeds. Rows come back in
/// grid order regardless of the parallelism degree, and rerunning the same
/// spec reproduces them exactly.
inline std::vector<ExperimentRow> run_grid(const ExperimentSpec& spec,
                                           int jobs = 1) {
    spec.validate();
    std::size_t cells = 1;
    for (const GridParam& p : spec.grid) cells *= p.values.size();

    std::vector<json> configs(cells);
    std::vector<std::vector<std::pair<std::string, std::string>>> labels(cells);
    for (std::size_t cell = 0; cell < cells; ++cell) {
        json patched = spec.base_config;
        std::size_t rest = cell;
        for (const GridParam& p : spec.grid) {
            const json& value = p.values[rest % p.values.size()];
            rest /= p.values.size();
            patched[json::json_pointer(p.path)] = value;
            labels[cell].emplace_back(p.path, detail::json_value_text(value));
        }
        configs[cell] = std::move(patched);
    }

    std::vector<ExperimentRow> rows(cells);
    std::atomic<std::size_t> next{0};
    const int workers = std::max(1, jobs);
    auto work = [&] {
        for (;;) {
            const std::size_t cell = next.fetch_add(1);
            if (cell >= cells) return;
            rows[cell] = detail::evaluate_cell(configs[cell], spec.seeds, spec.eta);
            rows[cell].params = labels[cell];
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < workers; ++i) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }
    return rows;
}

/// Non-dominated rows under (maximize rho_min, minimize m_mean). Exact
/// duplicates keep their first occurrence.
inline std::vector<ExperimentRow> pareto_front(
    const std::vector<ExperimentRow>& rows) {
    std::vector<ExperimentRow> front;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const ExperimentRow& r = rows[i];
        bool dominated = false;
        for (std::size_t k = 0; k < rows.size() && !dominated; ++k) {
            if (k == i) continue;
            const ExperimentRow& s = rows[k];
            const bool as_good = s.rho_min >= r.rho_min && s.m_mean <= r.m_mean;
            const bool better = s.rho_min > r.rho_min || s.m_mean < r.m_mean;
            if (as_good && better) dominated = true;
            // duplicate objectives: keep only the earliest row
            if (as_good && !better && k < i) dominated = true;
        }
        if (!dominated) front.push_back(r);
    }
    return front;
}

struct PolicySummary {
    std::string policy;
    bool any_feasible = false;
    ExperimentRow best;  // fewest mean events among feasible rows
};

struct SummaryReport {
    std::vector<PolicySummary> policies;
    long monotonicity_violations = 0;

    const PolicySummary* find(const std::string& policy) const {
        for (const PolicySummary& p : policies) {
            if (p.policy == policy) return &p;
        }
        return nullptr;
    }
};

inline double reduction_percent(double m, double reference) {
    if (reference <= 0.0) return 0.0;
    return 100.0 * (1.0 - m / reference);
}

/// Per-policy best feasible row plus a count of feasibility reversals along
/// single parameter axes: cells where a larger epsilon (hence smaller
/// thresholds, more traffic) failed while a smaller one passed. Those mark
/// points where lowering thresholds did not preserve satisfaction.
inline SummaryReport summarize(const std::vector<ExperimentRow>& rows) {
    SummaryReport report;
    for (const ExperimentRow& row : rows) {
        PolicySummary* entry = nullptr;
        for (PolicySummary& p : report.policies) {
            if (p.policy == row.policy) entry = &p;
        }
        if (!entry) {
            report.policies.push_back({row.policy, false, row});
            entry = &report.policies.back();
        }
        if (row.feasible &&
            (!entry->any_feasible || row.m_mean < entry->best.m_mean)) {
            entry->any_feasible = true;
            entry->best = row;
        }
    }

    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (i == k || rows[i].policy != rows[k].policy) continue;
            if (rows[i].params.size() != rows[k].params.size()) continue;
            int differing = -1;
            bool comparable = true;
            for (std::size_t p = 0; p < rows[i].params.size(); ++p) {
                if (rows[i].params[p].first != rows[k].params[p].first) {
                    comparable = false;
                    break;
                }
                if (rows[i].params[p].second != rows[k].params[p].second) {
                    if (differing >= 0) {
                        comparable = false;
                        break;
                    }
                    differing = static_cast<int>(p);
                }
            }
            if (!comparable || differing < 0) continue;
            char* end = nullptr;
            const double a = std::strtod(rows[i].params[differing].second.c_str(), &end);
            const double b = std::strtod(rows[k].params[differing].second.c_str(), &end);
            // orientation: constant thresholds tighten as they shrink,
            // epsilon-style parameters tighten as they grow
            const bool increase_tightens =
                rows[i].params[differing].first.find("constant_delta") ==
                std::string::npos;
            const bool k_is_tighter = increase_tightens ? a < b : a > b;
            if (k_is_tighter && rows[i].feasible && !rows[k].feasible) {
                report.monotonicity_violations += 1;
            }
        }
    }
    return report;
}

namespace detail {

inline void write_csv_field(std::ostream& os, const std::string& value) {
    if (value.find_first_of(",\"\n") == std::string::npos) {
        os << value;
        return;
    }
    os << '"';
    for (char c : value) {
        if (c == '"') os << '"';
        os << c;
    }
    os << '"';
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                current += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                current += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current += c;
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

} // namespace detail

inline void write_rows_csv(std::ostream& os,
                           const std::vector<ExperimentRow>& rows) {
    os << "policy";
    if (!rows.empty()) {
        for (const auto& [path, value] : rows.front().params) {
            (void)value;
            os << ',';
            detail::write_csv_field(os, path);
        }
    }
    os << ",rho_min,m_mean,m_std,feasible\n";
    char buf[32];
    const auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << ',' << buf;
    };
    for (const ExperimentRow& row : rows) {
        os << row.policy;
        for (const auto& [path, value] : row.params) {
            (void)path;
            os << ',';
            detail::write_csv_field(os, value);
        }
        num(row.rho_min);
        num(row.m_mean);
        num(row.m_std);
        os << ',' << (row.feasible ? 1 : 0) << '\n';
    }
}

inline std::vector<ExperimentRow> read_rows_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("empty rows csv");
    const std::vector<std::string> header = detail::split_csv_line(line);
    if (header.size() < 5 || header.front() != "policy") {
        throw ConfigError("unrecognized rows csv header");
    }
    const std::size_t n_params = header.size() - 5;

    std::vector<ExperimentRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> fields = detail::split_csv_line(line);
        if (fields.size() != header.size()) {
            throw ConfigError("malformed rows csv line: " + line);
        }
        ExperimentRow row;
        row.policy = fields[0];
        for (std::size_t p = 0; p < n_params; ++p) {
            row.params.emplace_back(header[1 + p], fields[1 + p]);
        }
        row.rho_min = std::stod(fields[1 + n_params]);
        row.m_mean = std::stod(fields[2 + n_params]);
        row.m_std = std::stod(fields[3 + n_params]);
        row.feasible = fields[4 + n_params] == "1";
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json rows_to_json(const std::vector<ExperimentRow>& rows) {
    json out = json::array();
    for (const ExperimentRow& row : rows) {
        json params = json::array();
        for (const auto& [path, value] : row.params) {
            params.push_back({{"path", path}, {"value", value}});
        }
        out.push_back({{"policy", row.policy},
                       {"params", std::move(params)},
                       {"rho_min", row.rho_min},
                       {"m_mean", row.m_mean},
                       {"m_std", row.m_std},
                       {"feasible", row.feasible},
                       {"failures", row.failures}});
    }
    return out;
}

inline std::vector<ExperimentRow> rows_from_json(const json& j) {
    std::vector<ExperimentRow> rows;
    for (const json& jr : j) {
        ExperimentRow row;
        row.policy = jr.at("policy").get<std::string>();
        for (const json& jp : jr.at("params")) {
            row.params.emplace_back(jp.at("path").get<std::string>(),
                                    jp.at("value").get<std::string>());
        }
        row.rho_min = jr.at("rho_min").get<double>();
        row.m_mean = jr.at("m_mean").get<double>();
        row.m_std = jr.at("m_std").get<double>();
        row.feasible = jr.at("feasible").get<bool>();
        row.failures = jr.value("failures", 0L);
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace ettreg

#endif
