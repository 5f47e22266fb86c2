#include <fstream>
#include <string>

#include <json.hpp>

#include "mvq/allocator.hpp"
#include "mvq/error.hpp"

namespace mvq {

namespace {

using nlohmann::json;

json plan_json(const TransmissionPlan& plan) {
  json symbols = json::array();
  for (const auto& s : plan.symbols) {
    json group = json::array();
    for (const auto& c : s.group) group.push_back({c.i, c.j});
    symbols.push_back({{"m", s.m}, {"p", s.p}, {"mu_bar", s.mu_bar}, {"group", std::move(group)}});
  }
  return {{"assignment", plan.assignment}, {"scaled", plan.scaled}, {"symbols", std::move(symbols)}};
}

TransmissionPlan plan_from(const json& doc) {
  TransmissionPlan plan;
  plan.assignment = doc.at("assignment").get<Assignment>();
  plan.scaled = doc.value("scaled", false);
  for (const auto& s : doc.at("symbols")) {
    PlanSymbol sym;
    sym.m = s.at("m").get<int>();
    sym.p = s.at("p").get<double>();
    sym.mu_bar = s.value("mu_bar", 0.0);
    for (const auto& c : s.at("group")) {
      if (!c.is_array() || c.size() != 2) throw FormatError("plan: group entries must be [i, j] pairs");
      sym.group.push_back({c[0].get<int>(), c[1].get<int>()});
    }
    if (sym.group.size() != static_cast<std::size_t>(sym.m)) {
      throw FormatError("plan: symbol group size must equal its order m");
    }
    plan.symbols.push_back(std::move(sym));
  }
  return plan;
}

}  // namespace

std::string plan_to_json(const TransmissionPlan& plan, int indent) { return plan_json(plan).dump(indent); }

TransmissionPlan plan_from_json(const std::string& text) {
  try {
    return plan_from(json::parse(text));
  } catch (const json::exception& e) {
    throw FormatError(std::string("plan: ") + e.what());
  }
}

void write_lut(const LookupTable& lut, std::ostream& out) {
  json entries = json::array();
  for (const auto& plan : lut.entries) entries.push_back(plan_json(plan));
  const json doc = {{"snr_lo_db", lut.snr_lo_db}, {"snr_hi_db", lut.snr_hi_db}, {"bits", lut.bits},
                    {"method", to_string(lut.method)}, {"p_tot", lut.p_tot}, {"N", lut.n},
                    {"B", lut.b}, {"entries", std::move(entries)}};
  out << doc.dump() << '\n';
}

void write_lut_file(const LookupTable& lut, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write LUT file " + path);
  write_lut(lut, out);
}

LookupTable read_lut(std::istream& in) {
  LookupTable lut;
  try {
    const json doc = json::parse(in);
    lut.snr_lo_db = doc.at("snr_lo_db").get<double>();
    lut.snr_hi_db = doc.at("snr_hi_db").get<double>();
    lut.bits = doc.at("bits").get<int>();
    lut.method = parse_method(doc.at("method").get<std::string>());
    lut.p_tot = doc.at("p_tot").get<double>();
    lut.n = doc.at("N").get<int>();
    lut.b = doc.at("B").get<int>();
    for (const auto& e : doc.at("entries")) lut.entries.push_back(plan_from(e));
  } catch (const json::exception& e) {
    throw FormatError(std::string("lut: ") + e.what());
  } catch (const RangeError& e) {
    throw FormatError(std::string("lut: ") + e.what());
  }
  if (!(lut.snr_lo_db < lut.snr_hi_db) || lut.bits < 1 || lut.bits > 20 || !(lut.p_tot > 0.0)) {
    throw FormatError("lut: invalid range, resolution or power");
  }
  if (lut.entries.size() != (std::size_t{1} << lut.bits)) throw FormatError("lut: expected 2^bits entries");
  return lut;
}

LookupTable read_lut_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open LUT file " + path);
  return read_lut(in);
}

}  // namespace mvq
