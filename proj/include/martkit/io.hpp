#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "martkit/core.hpp"

namespace martkit {

/// Shortest-round-trip-safe text for a double (17 significant digits).
std::string format_double(double v);

/// Long matrix CSV: header `t,row,col,value`, 1-based indices, one line per cell.
void write_series_csv(std::ostream& out, const MatrixSeries& series);
/// Thresholds CSV: header `t,z,w`.
void write_thresholds_csv(std::ostream& out, const MatrixSeries& series);

/// Parses a long matrix CSV and an optional thresholds CSV. Without
/// thresholds, z and w are computed from X by the endogenous definition.
/// Errors are ErrorKind::Parse with the offending line number.
MatrixSeries read_series_csv(std::istream& matrix, std::istream* thresholds = nullptr);

/// File-based read_series_csv; `source` names appear in error messages.
MatrixSeries ingest(const std::string& matrix_path,
                    const std::optional<std::string>& thresholds_path = std::nullopt);

}  // namespace martkit
