#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "rdforest/domain.hpp"

namespace rdforest {

/// Shortest decimal that round-trips to the same double; '.' decimal point
/// regardless of locale.
std::string format_full(double value);

/// Six significant digits, for human-facing output.
std::string format_short(double value);

/// Reads `y,x1,...,xd[,d]`. When the `d` column is absent the label is taken
/// from `rule` (or 0 with no rule). When both are present they must agree.
Dataset read_dataset_csv(std::istream& in, const std::optional<AssignmentRule>& rule = std::nullopt);
Dataset read_dataset_csv_file(const std::string& path,
                              const std::optional<AssignmentRule>& rule = std::nullopt);

void write_dataset_csv(std::ostream& out, const Dataset& data, bool include_treatment = true);
void write_dataset_csv_file(const std::string& path, const Dataset& data,
                            bool include_treatment = true);

}  // namespace rdforest
