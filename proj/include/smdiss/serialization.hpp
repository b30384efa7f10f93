#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "smdiss/dissipativity.hpp"
#include "smdiss/equilibrium.hpp"
#include "smdiss/simulation.hpp"

namespace smdiss {

using Json = nlohmann::ordered_json;

/// "%.17g" text of a double; parses back to the same value.
std::string format_double(double v);

/// Column names of the trace of an annotated trajectory, in file order.
std::vector<std::string> trace_header(const Trajectory& traj);

/// RFC-4180 CSV: one header row, one row per sample, CRLF line breaks.
/// State columns are the dq view for abc, dq and swing variants and the
/// deviation coordinates for shifted variants. Throws ValidationError when
/// the trajectory has not been annotated.
std::string format_trace(const Trajectory& traj, const MachineParams& p);
void write_trace(const Trajectory& traj, const MachineParams& p, const std::string& path);

/// Inverse of format_trace. An abc trace comes back as a dq trajectory since
/// only its dq view is stored. Ports, storage and per-kind columns are
/// restored as recorded.
Trajectory parse_trace(const std::string& text, ModelVariant variant, const std::string& source = "<trace>");
Trajectory read_trace(const std::string& path, ModelVariant variant);

/// Non-finite numbers are written as the strings "nan", "inf" and "-inf".
Json number_json(double v);
double number_from_json(const Json& j, const std::string& field);

Json to_json(const DissipationReport& r);
DissipationReport report_from_json(const Json& j);
Json to_json(const ConditionVerdict& v);
ConditionVerdict condition_from_json(const Json& j);
Json to_json(const Equilibrium& eq);
Json to_json(const ReductionMetrics& m);

/// Two-space indented JSON with a trailing newline.
std::string dump_json(const Json& j);

/// {"reports": [...]} document.
std::string dump_reports(const std::vector<DissipationReport>& reports);
std::vector<DissipationReport> parse_reports(const std::string& text);

std::string dump_report(const DissipationReport& r);
DissipationReport parse_report(const std::string& text);
void write_report(const DissipationReport& r, const std::string& path);

}  // namespace smdiss
