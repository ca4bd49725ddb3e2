#ifndef CAPWATT_DATASET_HPP
#define CAPWATT_DATASET_HPP

// Campaign measurements: one row per launch profile with the received signal
// and noise powers. Persisted as comma-separated text with a header row:
//
//   id,F_db,P_1..P_K,S_1..S_K,N_1..N_K,split
//
// Powers are in dBm; N_k is the one-polarization noise power in the symbol-rate
// bandwidth. Numbers are written in shortest round-trip form, so a
// write/read cycle is bit-exact.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "capwatt/errors.hpp"

namespace capwatt {

enum class Split { train, validation };

inline std::string_view to_string(Split s) { return s == Split::train ? "train" : "validation"; }

struct DatasetRow {
  std::uint64_t id = 0;
  double excursion_db = 0.0;
  std::vector<double> tx_dbm;
  std::vector<double> signal_dbm;
  std::vector<double> noise_dbm;
  Split split = Split::train;

  bool operator==(const DatasetRow&) const = default;
};

struct Dataset {
  std::size_t channel_count = 40;
  std::vector<DatasetRow> rows;

  std::size_t count(Split s) const {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.split == s;
    return n;
  }

  bool operator==(const Dataset&) const = default;
};

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw DataError("format_double: conversion failed");
  return std::string(buf, end);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) throw DataError("cannot parse number '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string dataset_header(std::size_t channel_count) {
  std::string h = "id,F_db";
  for (const char* prefix : {"P_", "S_", "N_"})
    for (std::size_t k = 1; k <= channel_count; ++k) h += "," + std::string(prefix) + std::to_string(k);
  h += ",split";
  return h;
}

inline void write_dataset(std::ostream& os, const Dataset& data) {
  os << dataset_header(data.channel_count) << '\n';
  for (const auto& r : data.rows) {
    if (r.tx_dbm.size() != data.channel_count || r.signal_dbm.size() != data.channel_count ||
        r.noise_dbm.size() != data.channel_count)
      throw ShapeError("write_dataset: row " + std::to_string(r.id) + " has the wrong channel count");
    os << r.id << ',' << format_double(r.excursion_db);
    for (const auto* v : {&r.tx_dbm, &r.signal_dbm, &r.noise_dbm})
      for (double x : *v) os << ',' << format_double(x);
    os << ',' << to_string(r.split) << '\n';
  }
}

inline Dataset read_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("read_dataset: empty input");
  const auto header = split_csv_line(line);
  if (header.size() < 6 || (header.size() - 3) % 3 != 0) throw DataError("read_dataset: malformed header");
  Dataset data;
  data.channel_count = (header.size() - 3) / 3;
  if (line != dataset_header(data.channel_count)) throw DataError("read_dataset: unexpected header columns");

  const std::size_t k = data.channel_count;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("read_dataset: line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                      " columns, expected " + std::to_string(header.size()));
    DatasetRow r;
    std::uint64_t id = 0;
    auto [end, ec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), id);
    if (ec != std::errc{} || end != cells[0].data() + cells[0].size())
      throw DataError("read_dataset: bad id on line " + std::to_string(line_no));
    r.id = id;
    r.excursion_db = parse_double(cells[1]);
    r.tx_dbm.resize(k);
    r.signal_dbm.resize(k);
    r.noise_dbm.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
      r.tx_dbm[c] = parse_double(cells[2 + c]);
      r.signal_dbm[c] = parse_double(cells[2 + k + c]);
      r.noise_dbm[c] = parse_double(cells[2 + 2 * k + c]);
    }
    const auto tag = cells.back();
    if (tag == "train")
      r.split = Split::train;
    else if (tag == "validation")
      r.split = Split::validation;
    else
      throw DataError("read_dataset: unknown split tag '" + std::string(tag) + "'");
    data.rows.push_back(std::move(r));
  }
  return data;
}

inline void save_dataset(const std::string& path, const Dataset& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path + " for writing");
  write_dataset(os, data);
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  return read_dataset(is);
}

}  // namespace capwatt

#endif  // CAPWATT_DATASET_HPP
