#ifndef MOU_IO_HPP
#define MOU_IO_HPP

/**
 * @file io.hpp
 * @brief CSV / JSON ingestion and emission for every public data type.
 *
 * Numbers in CSV files carry 17 significant digits so a double survives the
 * round-trip losslessly; JSON numbers use the shortest lossless
 * representation. Price CSVs accept either fractional-day or ISO-8601
 * timestamps (auto-detected).
 */

#include <string>

#include <json.hpp>

#include "mou/estimation.hpp"
#include "mou/model.hpp"
#include "mou/riccati.hpp"
#include "mou/simulation.hpp"
#include "mou/strategy.hpp"

namespace mou {

using ordered_json = nlohmann::ordered_json;

/// printf "%.17g"
std::string format_double(double x);

/// "1,2,3" -> vector; throws validation_error on parse failure.
Eigen::VectorXd parse_vector(const std::string& csv);

// -------- price CSV (header: time,<name1>,...,<named>) --------

/**
 * @brief Parse a price CSV. Timestamps may be fractional days or ISO-8601
 * (converted to days since the first observation). Parse failures cite the
 * 1-based line number. When non-null, *timeFormat receives "fractional_days"
 * or "iso8601" and *names the asset column headers.
 */
MarketPath read_price_csv(const std::string& file, std::string* timeFormat = nullptr,
                          std::vector<std::string>* names = nullptr);

void write_price_csv(const std::string& file, const MarketPath& path,
                     const std::vector<std::string>& names = {});

// -------- execution trace CSV --------

/// Columns: t, q_1..q_d, v_1..v_d, S_1..S_d, Stilde_1..Stilde_d, X, pnl.
/// The terminal row has no trading rate; its v columns are written as 0.
void write_trace_csv(const std::string& file, const ExecutionTrace& trace);

/// Rebuilds the trace from the documented columns (the in-memory fundamental
/// cash column is reconstructed as X; it is not part of the schema).
ExecutionTrace read_trace_csv(const std::string& file);

// -------- Riccati solution CSV + JSON summary --------

/// One row per grid node: t, vec(A) row-major, vec(B), vec(C), D, E, F.
void write_riccati_csv(const std::string& file, const RiccatiSolution& sol);
RiccatiSolution read_riccati_csv(const std::string& file);

/// Bounds certificate and terminal diagnostics.
ordered_json solution_summary_json(const RiccatiSolution& sol);

// -------- histogram CSV --------

/// Columns: bin_left, bin_right, count.
void write_histogram_csv(const std::string& file, const PnLSummary& summary);

// -------- JSON codecs --------

ordered_json to_json(const Eigen::MatrixXd& M);
ordered_json to_json(const Eigen::VectorXd& v);
Eigen::MatrixXd matrix_from_json(const ordered_json& j);
Eigen::VectorXd vector_from_json(const ordered_json& j);

ordered_json to_json(const OUParams& ou);
OUParams ou_params_from_json(const ordered_json& j);

ordered_json to_json(const ExecutionSpec& exec);
ExecutionSpec execution_spec_from_json(const ordered_json& j);

ordered_json to_json(const StrategyConfig& cfg);
StrategyConfig strategy_config_from_json(const ordered_json& j);

ordered_json to_json(const PnLSummary& s);

ordered_json to_json(const VAR1Fit& fit);
ordered_json to_json(const JohansenResult& res);

/// Read a whole JSON file; io_error on missing file, validation_error on
/// malformed JSON.
ordered_json read_json_file(const std::string& file);
void write_json_file(const std::string& file, const ordered_json& j);

}  // namespace mou

#endif  // MOU_IO_HPP
