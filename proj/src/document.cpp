#include "stochlin/document.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json_util.hpp"

namespace stochlin {

namespace jsonio {

Json matrix(const Matrix& M) {
  Json rows = Json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json complex(Complex z) { return Json{{"re", z.real()}, {"im", z.imag()}}; }

Json cmatrix(const CMatrix& M) {
  if (M.imag().cwiseAbs().maxCoeff() == 0.0) return matrix(M.real());
  return Json{{"re", matrix(M.real())}, {"im", matrix(M.imag())}};
}

double read_number(const Json& j, const std::string& field) {
  if (!j.is_number()) throw ParseError("field '" + field + "': expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ParseError("field '" + field + "': non-finite number");
  return v;
}

Vector read_vector(const Json& j, const std::string& field) {
  if (!j.is_array()) throw ParseError("field '" + field + "': expected an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Index>(i)) = read_number(j[i], field + "[" + std::to_string(i) + "]");
  }
  return v;
}

Matrix read_matrix(const Json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) {
    throw ParseError("field '" + field + "': expected a non-empty array of rows");
  }
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Matrix M(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const std::string where = field + "[" + std::to_string(r) + "]";
    if (!j[r].is_array()) throw ParseError("field '" + where + "': expected a row array");
    if (j[r].size() != cols) {
      throw ParseError("field '" + field + "': ragged rows (row 0 has " + std::to_string(cols) +
                       " entries, row " + std::to_string(r) + " has " + std::to_string(j[r].size()) +
                       ")");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      M(static_cast<Index>(r), static_cast<Index>(c)) =
          read_number(j[r][c], where + "[" + std::to_string(c) + "]");
    }
  }
  return M;
}

}  // namespace jsonio

namespace {

using jsonio::Json;

void reject_unknown(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw ParseError("unknown field '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

void check_shape(const Matrix& M, Index rows, Index cols, const std::string& field) {
  if (M.rows() != rows || M.cols() != cols) {
    throw ParseError("field '" + field + "': expected " + std::to_string(rows) + "x" +
                     std::to_string(cols) + ", got " + std::to_string(M.rows()) + "x" +
                     std::to_string(M.cols()));
  }
}

// A single matrix (rows of numbers) or a list of matrices.
bool is_matrix_list(const Json& j) {
  return j.is_array() && !j.empty() && j[0].is_array() && !j[0].empty() && j[0][0].is_array();
}

std::vector<Matrix> read_matrices(const Json& j, const std::string& field, bool& as_list) {
  std::vector<Matrix> out;
  if (is_matrix_list(j)) {
    as_list = true;
    for (std::size_t i = 0; i < j.size(); ++i) {
      out.push_back(jsonio::read_matrix(j[i], field + "[" + std::to_string(i) + "]"));
    }
  } else if (j.is_array() && j.empty()) {
    as_list = true;
  } else {
    out.push_back(jsonio::read_matrix(j, field));
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json parse_json(const std::string& text, const std::string& source) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ParseError(source + ": empty document");
  }
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(source + ": " + e.what());
  }
}

}  // namespace

SystemQuad SystemDocument::system() const {
  if (!B) throw InvalidInput("this command needs the input matrix 'b'");
  if (Cs.size() != 1 || Ds.size() != 1) {
    throw InvalidInput("this command needs exactly one noise channel ('c' and 'd' as single matrices)");
  }
  return SystemQuad(A, *B, Cs.front(), Ds.front());
}

SystemDocument parse_system_text(const std::string& text, const std::string& source) {
  const Json j = parse_json(text, source);
  if (!j.is_object()) throw ParseError(source + ": expected a JSON object");
  reject_unknown(j, {"name", "a", "b", "c", "d", "q_output", "q_weight", "r", "uncertainty", "sim"}, "");

  SystemDocument doc;
  if (j.contains("name")) {
    if (!j["name"].is_string()) throw ParseError("field 'name': expected a string");
    doc.name = j["name"].get<std::string>();
  }
  if (!j.contains("a")) throw ParseError("missing field 'a'");
  doc.A = jsonio::read_matrix(j["a"], "a");
  const Index n = doc.A.rows();
  check_shape(doc.A, n, n, "a");

  if (j.contains("b")) {
    doc.B = jsonio::read_matrix(j["b"], "b");
    if (doc.B->rows() != n) {
      throw ParseError("field 'b': expected " + std::to_string(n) + " rows, got " +
                       std::to_string(doc.B->rows()));
    }
  }
  bool c_list = false;
  bool d_list = false;
  if (j.contains("c")) doc.Cs = read_matrices(j["c"], "c", c_list);
  if (j.contains("d")) doc.Ds = read_matrices(j["d"], "d", d_list);
  if (j.contains("c") && j.contains("d") && c_list != d_list) {
    throw ParseError("fields 'c' and 'd' must both be single matrices or both lists");
  }
  doc.noise_list = c_list || d_list;
  for (std::size_t i = 0; i < doc.Cs.size(); ++i) {
    check_shape(doc.Cs[i], n, n, c_list ? "c[" + std::to_string(i) + "]" : "c");
  }
  if (!doc.Ds.empty()) {
    if (!doc.B) throw ParseError("field 'd' given without 'b'");
    if (doc.Ds.size() != doc.Cs.size()) {
      throw ParseError("field 'd': expected " + std::to_string(doc.Cs.size()) + " matrices, got " +
                       std::to_string(doc.Ds.size()));
    }
    for (std::size_t i = 0; i < doc.Ds.size(); ++i) {
      check_shape(doc.Ds[i], n, doc.m(), d_list ? "d[" + std::to_string(i) + "]" : "d");
    }
  }
  if (j.contains("q_output")) {
    doc.Q_output = jsonio::read_matrix(j["q_output"], "q_output");
    if (doc.Q_output->cols() != n) {
      throw ParseError("field 'q_output': expected " + std::to_string(n) + " columns, got " +
                       std::to_string(doc.Q_output->cols()));
    }
  }
  if (j.contains("q_weight")) {
    doc.Q_weight = jsonio::read_matrix(j["q_weight"], "q_weight");
    check_shape(*doc.Q_weight, n, n, "q_weight");
  }
  if (j.contains("r")) {
    if (!doc.B) throw ParseError("field 'r' given without 'b'");
    doc.R = jsonio::read_matrix(j["r"], "r");
    check_shape(*doc.R, doc.m(), doc.m(), "r");
  }
  if (j.contains("uncertainty")) {
    const Json& u = j["uncertainty"];
    if (!u.is_object()) throw ParseError("field 'uncertainty': expected an object");
    reject_unknown(u, {"e", "g", "g1", "g2", "g3"}, "uncertainty");
    if (!u.contains("e")) throw ParseError("missing field 'uncertainty.e'");
    if (u.contains("g") == u.contains("g1")) {
      throw ParseError("field 'uncertainty': give exactly one of 'g' and 'g1'");
    }
    if (u.contains("g") && (u.contains("g2") || u.contains("g3"))) {
      throw ParseError("field 'uncertainty': 'g2'/'g3' go with 'g1', not 'g'");
    }
    UncertaintyModel um;
    um.E = jsonio::read_matrix(u["e"], "uncertainty.e");
    um.G1 = jsonio::read_matrix(u.contains("g") ? u["g"] : u["g1"], u.contains("g") ? "uncertainty.g"
                                                                                  : "uncertainty.g1");
    if (um.E.rows() != n) {
      throw ParseError("field 'uncertainty.e': expected " + std::to_string(n) + " rows");
    }
    if (um.G1.cols() != n) {
      throw ParseError("field 'uncertainty." + std::string(u.contains("g") ? "g" : "g1") +
                       "': expected " + std::to_string(n) + " columns");
    }
    if (u.contains("g2")) {
      um.G2 = jsonio::read_matrix(u["g2"], "uncertainty.g2");
      check_shape(um.G2, um.G1.rows(), doc.m(), "uncertainty.g2");
    }
    if (u.contains("g3")) {
      um.G3 = jsonio::read_matrix(u["g3"], "uncertainty.g3");
      check_shape(um.G3, um.G1.rows(), n, "uncertainty.g3");
    }
    doc.uncertainty = um;
  }
  if (j.contains("sim")) {
    const Json& s = j["sim"];
    if (!s.is_object()) throw ParseError("field 'sim': expected an object");
    reject_unknown(s, {"x0", "t", "dt", "trials", "seed", "grid_points", "extrapolate"}, "sim");
    SimConfig cfg;
    if (!s.contains("x0")) throw ParseError("missing field 'sim.x0'");
    cfg.x0 = jsonio::read_vector(s["x0"], "sim.x0");
    if (cfg.x0.size() != n) throw ParseError("field 'sim.x0': expected " + std::to_string(n) + " entries");
    if (s.contains("t")) cfg.T = jsonio::read_number(s["t"], "sim.t");
    if (s.contains("dt")) cfg.dt = jsonio::read_number(s["dt"], "sim.dt");
    const auto read_int = [&](const char* key) -> long long {
      const Json& v = s[key];
      if (!v.is_number_integer()) throw ParseError(std::string("field 'sim.") + key + "': expected an integer");
      return v.get<long long>();
    };
    if (s.contains("trials")) cfg.trials = static_cast<int>(read_int("trials"));
    if (s.contains("grid_points")) cfg.grid_points = static_cast<int>(read_int("grid_points"));
    if (s.contains("extrapolate")) {
      if (!s["extrapolate"].is_boolean()) throw ParseError("field 'sim.extrapolate': expected a boolean");
      cfg.extrapolate = s["extrapolate"].get<bool>();
    }
    if (s.contains("seed")) {
      if (!s["seed"].is_number_unsigned()) throw ParseError("field 'sim.seed': expected a non-negative integer");
      cfg.seed = s["seed"].get<std::uint64_t>();
    }
    try {
      validate(cfg, n);
    } catch (const InvalidInput& e) {
      throw ParseError(std::string("field 'sim': ") + e.what());
    }
    doc.sim = cfg;
  }
  return doc;
}

SystemDocument parse_system(const std::string& path) { return parse_system_text(read_file(path), path); }

std::string serialize_system(const SystemDocument& doc) {
  Json j;
  if (!doc.name.empty()) j["name"] = doc.name;
  j["a"] = jsonio::matrix(doc.A);
  if (doc.B) j["b"] = jsonio::matrix(*doc.B);
  const auto put = [&](const char* key, const std::vector<Matrix>& Ms) {
    if (doc.noise_list) {
      Json arr = Json::array();
      for (const auto& M : Ms) arr.push_back(jsonio::matrix(M));
      j[key] = arr;
    } else if (!Ms.empty()) {
      j[key] = jsonio::matrix(Ms.front());
    }
  };
  if (!doc.Cs.empty() || doc.noise_list) put("c", doc.Cs);
  if (!doc.Ds.empty()) put("d", doc.Ds);
  if (doc.Q_output) j["q_output"] = jsonio::matrix(*doc.Q_output);
  if (doc.Q_weight) j["q_weight"] = jsonio::matrix(*doc.Q_weight);
  if (doc.R) j["r"] = jsonio::matrix(*doc.R);
  if (doc.uncertainty) {
    const UncertaintyModel& u = *doc.uncertainty;
    Json uj;
    uj["e"] = jsonio::matrix(u.E);
    if (u.G2.size() == 0 && u.G3.size() == 0) {
      uj["g"] = jsonio::matrix(u.G1);
    } else {
      uj["g1"] = jsonio::matrix(u.G1);
      if (u.G2.size() > 0) uj["g2"] = jsonio::matrix(u.G2);
      if (u.G3.size() > 0) uj["g3"] = jsonio::matrix(u.G3);
    }
    j["uncertainty"] = uj;
  }
  if (doc.sim) {
    const SimConfig& s = *doc.sim;
    j["sim"] = Json{{"x0", jsonio::vector(s.x0)}, {"t", s.T},       {"dt", s.dt},
                    {"trials", s.trials},         {"seed", s.seed}, {"grid_points", s.grid_points}};
    if (s.extrapolate) j["sim"]["extrapolate"] = true;
  }
  return j.dump(2) + "\n";
}

Matrix parse_gain_text(const std::string& text, const std::string& source) {
  const Json j = parse_json(text, source);
  if (j.is_object()) {
    reject_unknown(j, {"k"}, "");
    if (!j.contains("k")) throw ParseError(source + ": missing field 'k'");
    return jsonio::read_matrix(j["k"], "k");
  }
  return jsonio::read_matrix(j, "k");
}

Matrix parse_gain(const std::string& path) { return parse_gain_text(read_file(path), path); }

}  // namespace stochlin
