#include "mou/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mou {

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim spaces and a possible trailing CR
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

bool parse_double_strict(const std::string& s, double& v) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto res = std::from_chars(first, last, v);
    return res.ec == std::errc() && res.ptr == last;
}

// days since 1970-01-01 (proleptic Gregorian)
long days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

bool parse_iso8601(const std::string& s, double& epochSeconds) {
    int y = 0;
    unsigned mo = 0, da = 0, hh = 0, mm = 0;
    double ss = 0.0;
    char sep = 0;
    int consumed = 0;
    // date-only
    if (std::sscanf(s.c_str(), "%d-%u-%u%n", &y, &mo, &da, &consumed) == 3 &&
        consumed == static_cast<int>(s.size())) {
        epochSeconds = 86400.0 * days_from_civil(y, mo, da);
        return true;
    }
    // date + time, optional fractional seconds, optional trailing Z
    if (std::sscanf(s.c_str(), "%d-%u-%u%c%u:%u:%lf%n", &y, &mo, &da, &sep, &hh, &mm, &ss,
                    &consumed) >= 7 &&
        (sep == 'T' || sep == ' ')) {
        std::string rest = s.substr(static_cast<std::size_t>(consumed));
        if (!rest.empty() && rest != "Z") return false;
        epochSeconds = 86400.0 * days_from_civil(y, mo, da) + 3600.0 * hh + 60.0 * mm + ss;
        return true;
    }
    return false;
}

std::ofstream open_out(const std::string& file) {
    std::ofstream out(file);
    if (!out) throw io_error("cannot open for writing: " + file);
    return out;
}

std::ifstream open_in(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw io_error("cannot open for reading: " + file);
    return in;
}

}  // namespace

Eigen::VectorXd parse_vector(const std::string& csv) {
    const auto fields = split_csv_line(csv);
    Eigen::VectorXd v(static_cast<Eigen::Index>(fields.size()));
    for (std::size_t i = 0; i < fields.size(); ++i)
        if (!parse_double_strict(fields[i], v[static_cast<Eigen::Index>(i)]))
            throw validation_error("cannot parse number '" + fields[i] + "' in vector '" + csv +
                                   "'");
    return v;
}

MarketPath read_price_csv(const std::string& file, std::string* timeFormat,
                          std::vector<std::string>* names) {
    std::ifstream in = open_in(file);
    std::string line;
    if (!std::getline(in, line)) throw io_error(file + ": empty file");
    const auto header = split_csv_line(line);
    if (header.size() < 2)
        throw validation_error(file + ":1: header must be time,<asset names>");
    const std::size_t d = header.size() - 1;
    if (names) names->assign(header.begin() + 1, header.end());

    std::vector<double> times;
    std::vector<double> prices;
    bool iso = false, sawRow = false;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != d + 1)
            throw validation_error(file + ":" + std::to_string(lineno) + ": expected " +
                                   std::to_string(d + 1) + " fields, got " +
                                   std::to_string(fields.size()));
        // ISO timestamps are carried as raw epoch seconds until the end so the
        // re-basing subtraction happens before the lossy division by 86400.
        double t = 0.0;
        if (!sawRow) {
            if (parse_double_strict(fields[0], t)) {
                iso = false;
            } else if (parse_iso8601(fields[0], t)) {
                iso = true;
            } else {
                throw validation_error(file + ":" + std::to_string(lineno) +
                                       ": cannot parse timestamp '" + fields[0] + "'");
            }
            sawRow = true;
        } else if (iso) {
            if (!parse_iso8601(fields[0], t))
                throw validation_error(file + ":" + std::to_string(lineno) +
                                       ": cannot parse timestamp '" + fields[0] + "'");
        } else if (!parse_double_strict(fields[0], t)) {
            throw validation_error(file + ":" + std::to_string(lineno) +
                                   ": cannot parse timestamp '" + fields[0] + "'");
        }
        times.push_back(t);
        for (std::size_t j = 1; j < fields.size(); ++j) {
            double p = 0.0;
            if (!parse_double_strict(fields[j], p))
                throw validation_error(file + ":" + std::to_string(lineno) +
                                       ": cannot parse price '" + fields[j] + "'");
            prices.push_back(p);
        }
    }
    if (times.size() < 2) throw validation_error(file + ": need at least two rows");

    MarketPath path;
    const Eigen::Index n = static_cast<Eigen::Index>(times.size());
    path.times.resize(n);
    path.prices.resize(n, static_cast<Eigen::Index>(d));
    const double t0 = iso ? times.front() : 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double shifted = times[static_cast<std::size_t>(i)] - t0;
        path.times[i] = iso ? shifted / 86400.0 : shifted;
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j)
            path.prices(i, j) = prices[static_cast<std::size_t>(i) * d + j];
    }
    if (timeFormat) *timeFormat = iso ? "iso8601" : "fractional_days";
    path.validate();
    return path;
}

void write_price_csv(const std::string& file, const MarketPath& path,
                     const std::vector<std::string>& names) {
    std::ofstream out = open_out(file);
    out << "time";
    for (Eigen::Index j = 0; j < path.d(); ++j)
        out << ','
            << (static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)]
                                                           : "S" + std::to_string(j + 1));
    out << '\n';
    for (Eigen::Index i = 0; i < path.n(); ++i) {
        out << format_double(path.times[i]);
        for (Eigen::Index j = 0; j < path.d(); ++j) out << ',' << format_double(path.prices(i, j));
        out << '\n';
    }
}

void write_trace_csv(const std::string& file, const ExecutionTrace& trace) {
    std::ofstream out = open_out(file);
    const Eigen::Index d = trace.q.cols();
    out << "t";
    for (auto prefix : {"q", "v", "S", "Stilde"})
        for (Eigen::Index j = 1; j <= d; ++j) out << ',' << prefix << '_' << j;
    out << ",X,pnl\n";
    const int N = trace.grid.N;
    for (int k = 0; k <= N; ++k) {
        out << format_double(trace.grid.times[static_cast<std::size_t>(k)]);
        for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_double(trace.q(k, j));
        for (Eigen::Index j = 0; j < d; ++j)
            out << ',' << format_double(k < N ? trace.v(k, j) : 0.0);
        for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_double(trace.S(k, j));
        for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_double(trace.Stilde(k, j));
        out << ',' << format_double(trace.X[k]) << ',' << format_double(trace.pnl[k]) << '\n';
    }
}

ExecutionTrace read_trace_csv(const std::string& file) {
    std::ifstream in = open_in(file);
    std::string line;
    if (!std::getline(in, line)) throw io_error(file + ": empty file");
    const auto header = split_csv_line(line);
    // t + 4d + 2 columns
    if (header.size() < 7 || (header.size() - 3) % 4 != 0)
        throw validation_error(file + ":1: unexpected trace header");
    const Eigen::Index d = static_cast<Eigen::Index>((header.size() - 3) / 4);

    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw validation_error(file + ":" + std::to_string(lineno) + ": expected " +
                                   std::to_string(header.size()) + " fields");
        std::vector<double> row(fields.size());
        for (std::size_t j = 0; j < fields.size(); ++j)
            if (!parse_double_strict(fields[j], row[j]))
                throw validation_error(file + ":" + std::to_string(lineno) +
                                       ": cannot parse '" + fields[j] + "'");
        rows.push_back(std::move(row));
    }
    if (rows.size() < 3) throw validation_error(file + ": too few rows");

    const int N = static_cast<int>(rows.size()) - 1;
    ExecutionTrace tr;
    tr.grid = TimeGrid(rows.back()[0] - rows.front()[0], N);
    tr.q.resize(N + 1, d);
    tr.v.resize(N, d);
    tr.S.resize(N + 1, d);
    tr.Stilde.resize(N + 1, d);
    tr.X.resize(N + 1);
    tr.Xfund.resize(N + 1);
    tr.pnl.resize(N + 1);
    for (int k = 0; k <= N; ++k) {
        const auto& r = rows[static_cast<std::size_t>(k)];
        std::size_t c = 1;
        for (Eigen::Index j = 0; j < d; ++j) tr.q(k, j) = r[c++];
        for (Eigen::Index j = 0; j < d; ++j) {
            if (k < N) tr.v(k, j) = r[c];
            ++c;
        }
        for (Eigen::Index j = 0; j < d; ++j) tr.S(k, j) = r[c++];
        for (Eigen::Index j = 0; j < d; ++j) tr.Stilde(k, j) = r[c++];
        tr.X[k] = r[c++];
        tr.Xfund[k] = tr.X[k];
        tr.pnl[k] = r[c++];
    }
    return tr;
}

void write_riccati_csv(const std::string& file, const RiccatiSolution& sol) {
    std::ofstream out = open_out(file);
    const Eigen::Index d = sol.d();
    out << "t";
    for (auto name : {"A", "B", "C"})
        for (Eigen::Index i = 1; i <= d; ++i)
            for (Eigen::Index j = 1; j <= d; ++j) out << ',' << name << '_' << i << '_' << j;
    for (auto name : {"D", "E"})
        for (Eigen::Index i = 1; i <= d; ++i) out << ',' << name << '_' << i;
    out << ",F\n";
    for (int k = 0; k <= sol.grid.N; ++k) {
        const ODEState& s = sol.states[static_cast<std::size_t>(k)];
        out << format_double(sol.grid.times[static_cast<std::size_t>(k)]);
        for (const Eigen::MatrixXd* M : {&s.A, &s.B, &s.C})
            for (Eigen::Index i = 0; i < d; ++i)
                for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_double((*M)(i, j));
        for (const Eigen::VectorXd* vP : {&s.D, &s.E})
            for (Eigen::Index i = 0; i < d; ++i) out << ',' << format_double((*vP)[i]);
        out << ',' << format_double(s.F) << '\n';
    }
}

RiccatiSolution read_riccati_csv(const std::string& file) {
    std::ifstream in = open_in(file);
    std::string line;
    if (!std::getline(in, line)) throw io_error(file + ": empty file");
    const auto header = split_csv_line(line);
    // t + 3 d^2 + 2 d + 1 columns
    Eigen::Index d = 0;
    for (const auto& h : header)
        if (h.rfind("D_", 0) == 0) ++d;
    if (d == 0 || header.size() != static_cast<std::size_t>(3 * d * d + 2 * d + 2))
        throw validation_error(file + ":1: unexpected header layout");

    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw validation_error(file + ":" + std::to_string(lineno) + ": wrong field count");
        std::vector<double> row(fields.size());
        for (std::size_t j = 0; j < fields.size(); ++j)
            if (!parse_double_strict(fields[j], row[j]))
                throw validation_error(file + ":" + std::to_string(lineno) +
                                       ": cannot parse '" + fields[j] + "'");
        rows.push_back(std::move(row));
    }
    if (rows.size() < 3) throw validation_error(file + ": too few grid nodes");

    RiccatiSolution sol;
    const int N = static_cast<int>(rows.size()) - 1;
    sol.grid = TimeGrid(rows.back()[0], N);
    sol.states.resize(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        ODEState s = ODEState::zero(d);
        std::size_t c = 1;
        for (Eigen::MatrixXd* M : {&s.A, &s.B, &s.C})
            for (Eigen::Index i = 0; i < d; ++i)
                for (Eigen::Index j = 0; j < d; ++j) (*M)(i, j) = r[c++];
        for (Eigen::VectorXd* vP : {&s.D, &s.E})
            for (Eigen::Index i = 0; i < d; ++i) (*vP)[i] = r[c++];
        s.F = r[c++];
        sol.states[k] = std::move(s);
    }
    sol.boundsOk = false;
    sol.boundsMargin = std::numeric_limits<double>::quiet_NaN();
    sol.boundsTol = std::numeric_limits<double>::quiet_NaN();
    return sol;
}

ordered_json solution_summary_json(const RiccatiSolution& sol) {
    ordered_json j;
    j["grid"] = {{"T", sol.grid.T}, {"N", sol.grid.N}};
    j["bounds_ok"] = sol.boundsOk;
    j["bounds_margin"] =
        std::isfinite(sol.boundsMargin) ? ordered_json(sol.boundsMargin) : ordered_json(nullptr);
    j["bounds_tol"] =
        std::isfinite(sol.boundsTol) ? ordered_json(sol.boundsTol) : ordered_json(nullptr);
    j["A0"] = to_json(sol.states.front().A);
    j["theta_coeffs_at_0"] = {{"F", sol.states.front().F}};
    return j;
}

void write_histogram_csv(const std::string& file, const PnLSummary& summary) {
    std::ofstream out = open_out(file);
    out << "bin_left,bin_right,count\n";
    for (Eigen::Index b = 0; b < summary.counts.size(); ++b)
        out << format_double(summary.binEdges[b]) << ',' << format_double(summary.binEdges[b + 1])
            << ',' << summary.counts[b] << '\n';
}

ordered_json to_json(const Eigen::MatrixXd& M) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

ordered_json to_json(const Eigen::VectorXd& v) {
    ordered_json arr = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Eigen::MatrixXd matrix_from_json(const ordered_json& j) {
    if (!j.is_array() || j.empty()) throw validation_error("expected a non-empty matrix array");
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j[i].size()) != cols)
            throw validation_error("ragged matrix rows in JSON");
        for (Eigen::Index c = 0; c < cols; ++c) M(i, c) = j[i][c].get<double>();
    }
    return M;
}

Eigen::VectorXd vector_from_json(const ordered_json& j) {
    if (!j.is_array()) throw validation_error("expected a vector array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

ordered_json to_json(const OUParams& ou) {
    ordered_json j;
    j["d"] = ou.d;
    j["R"] = to_json(ou.R);
    j["Sbar"] = to_json(ou.Sbar);
    j["Sigma"] = to_json(ou.Sigma);
    return j;
}

OUParams ou_params_from_json(const ordered_json& j) {
    OUParams ou(matrix_from_json(j.at("R")), vector_from_json(j.at("Sbar")),
                matrix_from_json(j.at("Sigma")));
    if (j.contains("d") && j.at("d").get<Eigen::Index>() != ou.d)
        throw validation_error("OUParams JSON: field d disagrees with matrix shapes");
    return ou;
}

ordered_json to_json(const ExecutionSpec& exec) {
    ordered_json j;
    j["eta"] = to_json(exec.eta);
    j["K"] = to_json(exec.K);
    j["GammaTilde"] = to_json(exec.GammaTilde);
    j["gamma"] = exec.gamma;
    j["T"] = exec.T;
    return j;
}

ExecutionSpec execution_spec_from_json(const ordered_json& j) {
    const Eigen::MatrixXd eta = matrix_from_json(j.at("eta"));
    const Eigen::MatrixXd gammaTilde = matrix_from_json(j.at("GammaTilde"));
    const double gamma = j.at("gamma").get<double>();
    const double T = j.at("T").get<double>();
    if (j.contains("K")) {
        return ExecutionSpec(eta, matrix_from_json(j.at("K")), gammaTilde, gamma, T);
    }
    return ExecutionSpec(eta, gammaTilde, gamma, T);  // K defaults to zero
}

ordered_json to_json(const StrategyConfig& cfg) {
    ordered_json j;
    j["kind"] = to_string(cfg.kind);
    j["mode"] = to_string(cfg.mode);
    j["base"] = to_string(cfg.base);
    j["scale_factor"] = cfg.scaleFactor;
    j["max_rate"] = std::isfinite(cfg.maxRate) ? ordered_json(cfg.maxRate) : ordered_json(nullptr);
    return j;
}

StrategyConfig strategy_config_from_json(const ordered_json& j) {
    StrategyConfig cfg;
    cfg.kind = strategy_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("mode")) cfg.mode = trading_mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("base")) cfg.base = strategy_kind_from_string(j.at("base").get<std::string>());
    if (j.contains("scale_factor")) cfg.scaleFactor = j.at("scale_factor").get<double>();
    if (j.contains("max_rate") && !j.at("max_rate").is_null())
        cfg.maxRate = j.at("max_rate").get<double>();
    return cfg;
}

ordered_json to_json(const PnLSummary& s) {
    ordered_json j;
    j["n_paths"] = s.nPaths;
    j["seed"] = s.seed;
    j["mean"] = s.mean;
    j["stdev"] = s.stdev;
    j["skewness"] = s.skewness;
    ordered_json counts = ordered_json::array();
    for (Eigen::Index b = 0; b < s.counts.size(); ++b) counts.push_back(s.counts[b]);
    j["histogram"] = {{"bin_edges", to_json(s.binEdges)}, {"counts", std::move(counts)}};
    return j;
}

ordered_json to_json(const VAR1Fit& fit) {
    ordered_json j;
    j["Phi"] = to_json(fit.Phi);
    j["a"] = to_json(fit.a);
    j["Qres"] = to_json(fit.Qres);
    j["dt"] = fit.dt;
    j["n_obs"] = fit.nObs;
    j["r2"] = to_json(fit.r2);
    return j;
}

ordered_json to_json(const JohansenResult& res) {
    ordered_json j;
    ordered_json table = ordered_json::array();
    for (Eigen::Index k = 0; k < res.traceStats.size(); ++k) {
        table.push_back({{"null_hypothesis", "r <= " + std::to_string(k)},
                         {"trace_statistic", res.traceStats[k]},
                         {"critical_value_95", res.criticalValues95[k]},
                         {"conclusion",
                          res.traceStats[k] >= res.criticalValues95[k] ? "Rejected"
                                                                       : "Not rejected"}});
    }
    j["table"] = std::move(table);
    j["eigenvalues"] = to_json(res.eigenvalues);
    j["selected_rank"] = res.selectedRank;
    j["coint_vectors"] = to_json(res.cointVectors);
    return j;
}

ordered_json read_json_file(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw io_error("cannot open for reading: " + file);
    try {
        ordered_json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(file + ": malformed JSON: " + e.what());
    }
}

void write_json_file(const std::string& file, const ordered_json& j) {
    std::ofstream out(file);
    if (!out) throw io_error("cannot open for writing: " + file);
    out << j.dump(2) << '\n';
}

}  // namespace mou
