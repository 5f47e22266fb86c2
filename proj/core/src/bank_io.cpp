#include <fstream>
#include <string>

#include <json.hpp>

#include "mvq/error.hpp"
#include "mvq/vq.hpp"

namespace mvq {

using nlohmann::json;

namespace {

int require_int(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_number_integer()) {
    throw FormatError(std::string("bank: missing integer field \"") + key + "\"");
  }
  return doc[key].get<int>();
}

std::vector<double> require_reals(const json& arr, const std::string& what) {
  if (!arr.is_array()) throw FormatError("bank: " + what + " must be an array");
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& x : arr) {
    if (!x.is_number()) throw FormatError("bank: " + what + " must contain numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

CodebookBank read_bank(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("bank: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("bank: top level must be an object");
  if (require_int(doc, "version") != 1) throw FormatError("bank: unsupported version");

  CodebookBank bank;
  bank.D = require_int(doc, "D");
  bank.B = require_int(doc, "B");
  bank.N = require_int(doc, "N");
  bank.V = require_int(doc, "V");
  if (bank.D <= 0 || bank.B <= 0 || bank.B > 24 || bank.N <= 0 || bank.V <= 0) {
    throw FormatError("bank: D, N, V must be positive and B in [1, 24]");
  }
  if (!doc.contains("mu_min") || !doc.contains("lambda") || !doc.contains("codebooks") ||
      !doc.contains("profiles")) {
    throw FormatError("bank: missing mu_min, lambda, codebooks or profiles");
  }
  bank.mu_min = require_reals(doc["mu_min"], "mu_min");
  bank.lambda = require_reals(doc["lambda"], "lambda");

  const auto& cbs = doc["codebooks"];
  const auto& prs = doc["profiles"];
  if (!cbs.is_array() || cbs.size() != static_cast<std::size_t>(bank.V)) {
    throw FormatError("bank: codebooks must be an array of V codebooks");
  }
  if (!prs.is_array() || prs.size() != static_cast<std::size_t>(bank.V)) {
    throw FormatError("bank: profiles must be an array of V profiles");
  }
  if (bank.mu_min.size() != static_cast<std::size_t>(bank.V)) {
    throw FormatError("bank: mu_min must have V entries");
  }
  const std::size_t words = std::size_t{1} << bank.B;
  try {
    for (std::size_t v = 0; v < cbs.size(); ++v) {
      const std::string tag = "codebook " + std::to_string(v + 1);
      if (!cbs[v].is_array() || cbs[v].size() != words) {
        throw FormatError("bank: " + tag + " must hold 2^B codewords");
      }
      std::vector<double> flat;
      flat.reserve(words * static_cast<std::size_t>(bank.D));
      for (const auto& word : cbs[v]) {
        auto vals = require_reals(word, tag);
        if (vals.size() != static_cast<std::size_t>(bank.D)) {
          throw FormatError("bank: " + tag + " has a codeword whose length is not D");
        }
        flat.insert(flat.end(), vals.begin(), vals.end());
      }
      bank.codebooks.emplace_back(bank.D, bank.B, std::move(flat));
    }
    for (std::size_t v = 0; v < prs.size(); ++v) {
      const std::string tag = "profile " + std::to_string(v + 1);
      if (!prs[v].is_array() || prs[v].size() != static_cast<std::size_t>(bank.N)) {
        throw FormatError("bank: " + tag + " must hold N rows");
      }
      std::vector<double> flat;
      for (const auto& row : prs[v]) {
        auto vals = require_reals(row, tag);
        if (vals.size() != static_cast<std::size_t>(bank.B)) {
          throw FormatError("bank: " + tag + " has a row whose length is not B");
        }
        flat.insert(flat.end(), vals.begin(), vals.end());
      }
      bank.profiles.emplace_back(bank.N, bank.B, std::move(flat), bank.mu_min[v]);
    }
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(std::string("bank: ") + e.what());
  }
  bank.validate();
  return bank;
}

CodebookBank read_bank_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open bank file " + path);
  return read_bank(in);
}

void write_bank(const CodebookBank& bank, std::ostream& out) {
  bank.validate();
  json doc;
  doc["version"] = 1;
  doc["D"] = bank.D;
  doc["B"] = bank.B;
  doc["N"] = bank.N;
  doc["V"] = bank.V;
  doc["mu_min"] = bank.mu_min;
  doc["lambda"] = bank.lambda;
  json cbs = json::array();
  for (const auto& cb : bank.codebooks) {
    json words = json::array();
    for (std::size_t k = 0; k < cb.size(); ++k) {
      const auto c = cb.codeword(k);
      words.push_back(std::vector<double>(c.begin(), c.end()));
    }
    cbs.push_back(std::move(words));
  }
  doc["codebooks"] = std::move(cbs);
  json prs = json::array();
  for (const auto& pr : bank.profiles) {
    json rows = json::array();
    for (int i = 0; i < pr.positions(); ++i) {
      const auto r = pr.row(i);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    prs.push_back(std::move(rows));
  }
  doc["profiles"] = std::move(prs);
  out << doc.dump() << '\n';
}

void write_bank_file(const CodebookBank& bank, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write bank file " + path);
  write_bank(bank, out);
}

}  // namespace mvq
