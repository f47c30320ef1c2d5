#pragma once

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>  // nlohmann/json, vendored

#include "aggnash/dynamics.hpp"
#include "aggnash/error.hpp"
#include "aggnash/linalg.hpp"

namespace aggnash {

/// Locale-independent rendering with 17 significant digits.
inline void append_number(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  out.append(buf, res.ptr);
}

inline std::string trace_csv_header(const Trace& tr, bool with_lambda, bool with_envelope) {
  std::string h = "t";
  const auto block = [&](const char* name) {
    for (std::size_t i = 1; i <= tr.players; ++i) {
      for (std::size_t c = 1; c <= tr.dim; ++c) {
        h += ",";
        h += name;
        h += "_" + std::to_string(i) + "_" + std::to_string(c);
      }
    }
  };
  block("x");
  block("sigma");
  block("psi");
  if (with_lambda) {
    for (std::size_t i = 1; i <= tr.players; ++i) h += ",lambda_" + std::to_string(i);
  }
  for (std::size_t c = 1; c <= tr.dim; ++c) h += ",psi_mean_" + std::to_string(c);
  h += ",dist_norm";
  if (with_envelope) h += ",envelope";
  return h;
}

/// Writes one row per sample: `.` decimals, `,` separators, LF line ends.
inline std::string trace_to_csv(const Trace& tr, const std::vector<double>* envelope = nullptr) {
  const bool with_lambda = tr.size() > 0 && tr.states.front().lambda.has_value();
  if (envelope != nullptr && envelope->size() != tr.size()) {
    throw Error(Errc::dimension_mismatch, "envelope column must have one value per sample");
  }
  std::string out = trace_csv_header(tr, with_lambda, envelope != nullptr);
  out += '\n';
  const auto row_vec = [&](const Vec& v) {
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      out += ',';
      append_number(out, v(j));
    }
  };
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const SimState& s = tr.states[k];
    append_number(out, tr.times[k]);
    row_vec(s.x);
    row_vec(s.sigma);
    row_vec(s.psi);
    if (with_lambda) row_vec(*s.lambda);
    row_vec(tr.psi_mean[k]);
    out += ',';
    append_number(out, tr.dist_norm[k]);
    if (envelope != nullptr) {
      out += ',';
      append_number(out, (*envelope)[k]);
    }
    out += '\n';
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::config_error, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(Errc::config_error, "write failed for '" + path.string() + "'");
}

inline nlohmann::json to_json(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index j = 0; j < v.size(); ++j) a.push_back(v(j));
  return a;
}

/// Gnuplot script plotting the x block of a trace written as `csv_name`.
inline std::string gnuplot_script(const std::string& csv_name, std::size_t columns_x,
                                  const std::string& title) {
  std::string s;
  s += "set datafile separator ','\n";
  s += "set key autotitle columnhead outside right\n";
  s += "set xlabel 't [s]'\n";
  s += "set title '" + title + "'\n";
  s += "set terminal pngcairo size 900,600\n";
  s += "set output '" + csv_name.substr(0, csv_name.rfind('.')) + ".png'\n";
  s += "plot for [c=2:" + std::to_string(columns_x + 1) + "] '" + csv_name +
       "' using 1:c with lines\n";
  return s;
}

}  // namespace aggnash
