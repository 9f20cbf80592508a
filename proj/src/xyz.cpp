//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ebm/xyz.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ebm/errors.hpp"

namespace ebm {

namespace {

const char* kElementAliases[] = {"H", "C", "N", "O", "F"};

struct RawRecord {
  std::vector<int> labels;
  std::vector<Eigen::RowVector3d> rows;
  std::string comment;
};

[[noreturn]] void fail(const std::string& path, long line, const std::string& what) {
  throw parse_error(path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

std::string label_symbol(int label) { return "T" + std::to_string(label); }

int symbol_label(const std::string& symbol) {
  if (symbol.size() >= 2 && symbol[0] == 'T') {
    for (size_t i = 1; i < symbol.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(symbol[i]))) return -1;
    return std::stoi(symbol.substr(1));
  }
  for (int i = 0; i < 5; ++i)
    if (symbol == kElementAliases[i]) return i;
  return -1;
}

std::vector<MixedState> load_xyz(const std::string& path, int n_types) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);

  std::vector<RawRecord> records;
  std::string line;
  long lineno = 0;
  int max_label = -1;

  while (std::getline(in, line)) {
    ++lineno;
    // Skip blank separator lines between records.
    std::istringstream probe(line);
    std::string tok;
    if (!(probe >> tok)) continue;

    long count = 0;
    try {
      size_t pos = 0;
      count = std::stol(tok, &pos);
      if (pos != tok.size()) fail(path, lineno, "expected atom count, got '" + tok + "'");
    } catch (const std::exception&) {
      fail(path, lineno, "expected atom count, got '" + tok + "'");
    }
    std::string extra;
    if (probe >> extra) fail(path, lineno, "trailing tokens after atom count");
    if (count < 1) fail(path, lineno, "atom count must be >= 1");

    RawRecord rec;
    if (!std::getline(in, rec.comment)) fail(path, lineno + 1, "missing comment line");
    ++lineno;

    for (long i = 0; i < count; ++i) {
      if (!std::getline(in, line))
        fail(path, lineno + 1, "body ends after " + std::to_string(i) +
                                   " atoms, header declared " + std::to_string(count));
      ++lineno;
      std::istringstream ls(line);
      std::string sym;
      double x, y, z;
      if (!(ls >> sym >> x >> y >> z))
        fail(path, lineno, "expected '<symbol> <x> <y> <z>'");
      std::string tail;
      if (ls >> tail) fail(path, lineno, "trailing tokens after coordinates");
      const int label = symbol_label(sym);
      if (label < 0) fail(path, lineno, "unknown element symbol '" + sym + "'");
      rec.labels.push_back(label);
      rec.rows.emplace_back(x, y, z);
      if (label > max_label) max_label = label;
    }
    records.push_back(std::move(rec));
  }

  if (records.empty()) throw parse_error(path + ":1: empty file");

  int k = n_types > 0 ? n_types : max_label + 1;
  if (max_label >= k)
    throw parse_error(path + ": label T" + std::to_string(max_label) +
                      " out of range for n_types=" + std::to_string(k));

  std::vector<MixedState> out;
  out.reserve(records.size());
  for (const RawRecord& rec : records) {
    MixedState s;
    const int n = static_cast<int>(rec.labels.size());
    s.coords.resize(n, 3);
    s.types = Eigen::MatrixXd::Zero(n, k);
    for (int i = 0; i < n; ++i) {
      s.coords.row(i) = rec.rows[static_cast<size_t>(i)];
      s.types(i, rec.labels[static_cast<size_t>(i)]) = 1.0;
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

int row_argmax(const Eigen::MatrixXd& m, Eigen::Index i) {
  int best = 0;
  for (Eigen::Index j = 1; j < m.cols(); ++j)
    if (m(i, j) > m(i, best)) best = static_cast<int>(j);
  return best;
}

void write_record(std::ofstream& out, const Coords& coords, const std::vector<int>& labels,
                  const std::string& comment) {
  out << coords.rows() << "\n" << comment << "\n";
  char buf[128];
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    std::snprintf(buf, sizeof(buf), "%s %.6f %.6f %.6f", label_symbol(labels[static_cast<size_t>(i)]).c_str(),
                  coords(i, 0), coords(i, 1), coords(i, 2));
    out << buf << "\n";
  }
}

}  // namespace

void save_xyz(const std::vector<MixedState>& states, const std::string& path,
              const std::vector<std::string>& comments) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  for (size_t r = 0; r < states.size(); ++r) {
    const MixedState& s = states[r];
    std::vector<int> labels(static_cast<size_t>(s.n_atoms()));
    for (int i = 0; i < s.n_atoms(); ++i) labels[static_cast<size_t>(i)] = row_argmax(s.types, i);
    write_record(out, s.coords, labels, r < comments.size() ? comments[r] : "");
  }
}

void save_xyz(const std::vector<LabeledCloud>& clouds, int /*n_types*/, const std::string& path,
              const std::vector<std::string>& comments) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  for (size_t r = 0; r < clouds.size(); ++r)
    write_record(out, clouds[r].coords, clouds[r].labels, r < comments.size() ? comments[r] : "");
}

std::string read_first_comment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) return "";
  if (!std::getline(in, line)) return "";
  return line;
}

}  // namespace ebm
