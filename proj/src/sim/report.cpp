#include <algorithm>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "wfctl/sim/scenario.hpp"

namespace wfctl::sim {

namespace {

const std::vector<std::string> kColumns{"Test #",
                                        "Workflow",
                                        "Injected Error Type",
                                        "Injected Error",
                                        "Ave. Registration Residual",
                                        "Corresponding to Operation",
                                        "Step of Rejection (at State)"};

std::vector<std::string> row_cells(int number, const RunReport& r) {
  std::string residual = "N/A";
  // Only a registration that actually ran has a residual to show.
  if (r.avg_residual) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f mm", *r.avg_residual);
    residual = buf;
  }
  std::string op = "N/A", state = "N/A";
  if (r.rejections > 0) {
    op = r.rejected_operation.value_or("N/A");
    state = r.rejection_state ? registration_state_label(*r.rejection_state) : "N/A";
  }
  return {std::to_string(number),
          r.scenario,
          r.fault ? r.fault->type_label() : "None",
          r.fault ? r.fault->describe(r.landmark_count) : "None",
          residual,
          op,
          state};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::optional<ReportFormat> parse_format(std::string_view text) {
  if (text == "csv") return ReportFormat::kCsv;
  if (text == "text") return ReportFormat::kText;
  if (text == "jsonl") return ReportFormat::kJsonl;
  return std::nullopt;
}

nlohmann::json to_json(const RunReport& r) {
  nlohmann::json j;
  j["scenario"] = r.scenario;
  j["seed"] = r.seed;
  j["landmarks"] = r.landmark_count;
  if (r.fault) {
    j["fault"] = {{"type", r.fault->type_label()},
                  {"description", r.fault->describe(r.landmark_count)},
                  {"index", r.fault->index},
                  {"axis", std::string(1, r.fault->axis)},
                  {"offset_mm", r.fault->offset_mm}};
  } else {
    j["fault"] = nullptr;
  }
  j["avg_residual"] = r.avg_residual ? nlohmann::json(*r.avg_residual) : nlohmann::json(nullptr);
  j["rejections"] = r.rejections;
  j["rejected_operation"] = r.rejections && r.rejected_operation ? nlohmann::json(*r.rejected_operation) : nullptr;
  j["rejection_state"] = r.rejections && r.rejection_state ? nlohmann::json(*r.rejection_state) : nullptr;
  j["final_registration"] = r.final_registration;
  j["verdicts"] = r.verdicts;
  j["flags"] = r.flags;
  auto& pe = j["placement_errors"] = nlohmann::json::array();
  for (const auto& e : r.placement_errors) {
    pe.push_back({{"translational_mm", e.translational_mm}, {"rotational_deg", e.rotational_deg}});
  }
  auto& tr = j["transitions"] = nlohmann::json::array();
  for (const auto& t : r.transitions) tr.push_back(core::to_json(t));
  return j;
}

RunReport report_from_json(const nlohmann::json& j) {
  RunReport r;
  r.scenario = j.at("scenario").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.landmark_count = j.at("landmarks").get<std::size_t>();
  if (!j.at("fault").is_null()) {
    const auto& f = j.at("fault");
    InjectedFault fault;
    const auto type = f.at("type").get<std::string>();
    if (type == "Missing Landmark Plan") {
      fault = InjectedFault::missing_plan();
    } else if (type == "Missing a Landmark") {
      fault = InjectedFault::missing_landmark(f.at("index").get<int>());
    } else if (type == "Large Digitization Error") {
      fault = InjectedFault::large_error(f.at("index").get<int>(), f.at("axis").get<std::string>().at(0),
                                         f.at("offset_mm").get<double>());
    } else {
      throw std::invalid_argument("unknown fault type '" + type + "'");
    }
    r.fault = fault;
  }
  if (!j.at("avg_residual").is_null()) r.avg_residual = j.at("avg_residual").get<double>();
  r.rejections = j.at("rejections").get<std::size_t>();
  if (!j.at("rejected_operation").is_null()) r.rejected_operation = j.at("rejected_operation").get<std::string>();
  if (!j.at("rejection_state").is_null()) r.rejection_state = j.at("rejection_state").get<std::string>();
  r.final_registration = j.at("final_registration").get<std::string>();
  r.verdicts = j.at("verdicts").get<std::vector<std::string>>();
  r.flags = j.at("flags").get<std::map<std::string, bool>>();
  for (const auto& e : j.at("placement_errors")) {
    r.placement_errors.push_back({e.at("translational_mm").get<double>(), e.at("rotational_deg").get<double>()});
  }
  for (const auto& t : j.at("transitions")) r.transitions.push_back(core::record_from_json(t));
  return r;
}

void emit_report(std::ostream& out, const std::vector<RunReport>& reports, ReportFormat format,
                 const std::vector<int>& test_numbers) {
  auto number = [&](std::size_t i) {
    return i < test_numbers.size() ? test_numbers[i] : static_cast<int>(i) + 1;
  };

  if (format == ReportFormat::kJsonl) {
    for (std::size_t i = 0; i < reports.size(); ++i) {
      auto j = to_json(reports[i]);
      j["test"] = number(i);
      out << j.dump() << '\n';
    }
    return;
  }

  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < reports.size(); ++i) rows.push_back(row_cells(number(i), reports[i]));

  if (format == ReportFormat::kCsv) {
    for (std::size_t c = 0; c < kColumns.size(); ++c) out << (c ? "," : "") << csv_field(kColumns[c]);
    out << '\n';
    for (const auto& row : rows) {
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << csv_field(row[c]);
      out << '\n';
    }
    return;
  }

  std::vector<std::size_t> width;
  for (const auto& h : kColumns) width.push_back(h.size());
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      out << (c ? " | " : "") << cells[c];
      if (c + 1 < cells.size()) out << std::string(width[c] - cells[c].size(), ' ');
    }
    out << '\n';
  };
  line(kColumns);
  std::size_t total = 3 * (width.size() - 1);
  for (auto w : width) total += w;
  out << std::string(total, '-') << '\n';
  for (const auto& row : rows) line(row);
}

}  // namespace wfctl::sim
