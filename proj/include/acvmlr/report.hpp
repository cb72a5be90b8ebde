#pragma once
#include <iosfwd>
#include <string>
#include <vector>

#include "acvmlr/error.hpp"
#include "acvmlr/sweep.hpp"

namespace acvmlr::report {

/// Report written by a different schema version.
class VersionMismatch : public ParseError {
public:
    using ParseError::ParseError;
};

/// JSON document: provenance, grid, argmin table and one object per lambda point.
void write_json(std::ostream& out, const CvReport& report);
/// Rejects unknown keys and other schema versions.
CvReport read_json(std::istream& in);

void save(const std::string& path, const CvReport& report);
CvReport load(const std::string& path);

/// Flat CSV, one row per lambda point; missing estimates are empty cells.
void write_csv(std::ostream& out, const CvReport& report);
/// Parses the CSV export back into records (flags and costs are not exported).
std::vector<LambdaRecord> read_csv(std::istream& in);

/// Aligned text table plus an argmin summary.
void write_table(std::ostream& out, const CvReport& report);

} // namespace acvmlr::report
