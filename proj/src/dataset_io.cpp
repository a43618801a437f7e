#include "coxlasso/dataset_io.hpp"

#include "coxlasso/numeric_text.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace coxlasso {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& origin, int line, const std::string& message) {
  throw std::runtime_error(origin + ":" + std::to_string(line) + ": " + message);
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

// "key=value" with an exact key match.
std::string expect_kv(const std::string& tok, const std::string& key, const std::string& origin,
                      int line) {
  const std::string prefix = key + "=";
  if (tok.rfind(prefix, 0) != 0) fail(origin, line, "expected '" + key + "=...', got '" + tok + "'");
  return tok.substr(prefix.size());
}

double json_time(const ordered_json& v, const std::string& what) {
  if (v.is_string()) return parse_double(v.get<std::string>(), what);
  if (v.is_number()) return v.get<double>();
  throw std::runtime_error(what + ": expected a number");
}

ordered_json time_to_json(double t) {
  if (std::isfinite(t)) return t;
  return format_double(t);  // JSON has no infinities; carry them as strings
}

}  // namespace

std::string dataset_to_text(const Dataset& d) {
  std::string out;
  out += "n=" + std::to_string(d.n()) + " p=" + std::to_string(d.p) +
         " K=" + format_double(d.k_bound) + "\n";
  for (int i = 0; i < d.n(); ++i) {
    const Subject& s = d.subjects[static_cast<std::size_t>(i)];
    out += "subject " + std::to_string(i) + " risk=" + format_double(s.at_risk_start) + "," +
           format_double(s.at_risk_end) +
           " event=" + (s.event_time ? format_double(*s.event_time) : std::string("none")) + "\n";
    const CovariatePath& path = s.path;
    if (path.values.size() != path.breakpoints.size() + 1) {
      throw std::runtime_error("save_dataset: subject " + std::to_string(i) +
                               " has a ragged covariate path");
    }
    for (std::size_t k = 0; k < path.values.size(); ++k) {
      const double t_lo = (k == 0) ? s.at_risk_start : path.breakpoints[k - 1];
      if (k > 0 && !(t_lo > s.at_risk_start)) {
        throw std::runtime_error("save_dataset: subject " + std::to_string(i) +
                                 " switches covariates at or before its at-risk start, which the "
                                 "segment format cannot carry");
      }
      out += "seg " + format_double(t_lo);
      for (Eigen::Index j = 0; j < path.values[k].size(); ++j) {
        out += " " + format_double(path.values[k][j]);
      }
      out += "\n";
    }
  }
  return out;
}

Dataset dataset_from_text(const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  int line_no = 0;

  auto next_line = [&](std::string& out) {
    while (std::getline(is, out)) {
      ++line_no;
      if (!out.empty() && out.back() == '\r') out.pop_back();
      if (!out.empty()) return true;
    }
    return false;
  };

  if (!next_line(line)) fail(origin, 1, "empty dataset file");
  auto heads = split_ws(line);
  if (heads.size() != 3) fail(origin, line_no, "header must be 'n=<int> p=<int> K=<float>'");
  const long long n = parse_int(expect_kv(heads[0], "n", origin, line_no), origin + ": n");
  const long long p = parse_int(expect_kv(heads[1], "p", origin, line_no), origin + ": p");
  const double k_bound = parse_double(expect_kv(heads[2], "K", origin, line_no), origin + ": K");
  if (n < 0 || p <= 0) fail(origin, line_no, "header requires n >= 0 and p > 0");

  Dataset d;
  d.p = static_cast<int>(p);
  d.k_bound = k_bound;
  d.subjects.reserve(static_cast<std::size_t>(n));

  bool have_line = next_line(line);
  for (long long i = 0; i < n; ++i) {
    if (!have_line) fail(origin, line_no, "expected subject " + std::to_string(i));
    auto toks = split_ws(line);
    if (toks.size() != 4 || toks[0] != "subject") {
      fail(origin, line_no, "expected 'subject <id> risk=<start>,<end> event=<time|none>'");
    }
    if (parse_int(toks[1], origin + ": subject id") != i) {
      fail(origin, line_no, "subject ids must run 0.." + std::to_string(n - 1) + " in order");
    }
    const std::string risk = expect_kv(toks[2], "risk", origin, line_no);
    const auto comma = risk.find(',');
    if (comma == std::string::npos) fail(origin, line_no, "risk must be '<start>,<end>'");
    Subject s;
    s.at_risk_start = parse_double(risk.substr(0, comma), origin + ": risk start");
    s.at_risk_end = parse_double(risk.substr(comma + 1), origin + ": risk end");
    const std::string ev = expect_kv(toks[3], "event", origin, line_no);
    if (ev != "none") s.event_time = parse_double(ev, origin + ": event time");

    // Segment lines until the next subject line or end of file.
    bool first_seg = true;
    while ((have_line = next_line(line)) && line.rfind("seg ", 0) == 0) {
      auto seg = split_ws(line);
      if (seg.size() != static_cast<std::size_t>(p) + 2) {
        fail(origin, line_no,
             "seg line needs a start time and exactly " + std::to_string(p) + " values");
      }
      const double t_lo = parse_double(seg[1], origin + ": seg start");
      if (first_seg) {
        if (t_lo != s.at_risk_start) {
          fail(origin, line_no, "first segment must start at the at-risk start");
        }
      } else {
        if (!(s.path.breakpoints.empty() ? t_lo > s.at_risk_start
                                         : t_lo > s.path.breakpoints.back())) {
          fail(origin, line_no, "segment starts must be strictly increasing");
        }
        s.path.breakpoints.push_back(t_lo);
      }
      Eigen::VectorXd v(p);
      for (long long j = 0; j < p; ++j) {
        v[j] = parse_double(seg[static_cast<std::size_t>(j) + 2],
                            origin + ":" + std::to_string(line_no) + ": covariate value");
      }
      s.path.values.push_back(std::move(v));
      first_seg = false;
    }
    if (s.path.values.empty()) fail(origin, line_no, "subject has no seg lines");
    d.subjects.push_back(std::move(s));
  }
  if (have_line) fail(origin, line_no, "unexpected content after the last subject");
  return d;
}

std::string dataset_to_json_text(const Dataset& d) {
  ordered_json root;
  root["n"] = d.n();
  root["p"] = d.p;
  root["K"] = d.k_bound;
  ordered_json subjects = ordered_json::array();
  for (int i = 0; i < d.n(); ++i) {
    const Subject& s = d.subjects[static_cast<std::size_t>(i)];
    ordered_json js;
    js["id"] = i;
    js["risk"] = {{"start", time_to_json(s.at_risk_start)}, {"end", time_to_json(s.at_risk_end)}};
    js["event"] = s.event_time ? ordered_json(*s.event_time) : ordered_json(nullptr);
    ordered_json segs = ordered_json::array();
    if (s.path.values.size() != s.path.breakpoints.size() + 1) {
      throw std::runtime_error("save_dataset: subject " + std::to_string(i) +
                               " has a ragged covariate path");
    }
    for (std::size_t k = 0; k < s.path.values.size(); ++k) {
      ordered_json seg;
      seg["t_lo"] = (k == 0) ? time_to_json(s.at_risk_start) : time_to_json(s.path.breakpoints[k - 1]);
      seg["values"] = std::vector<double>(s.path.values[k].begin(), s.path.values[k].end());
      segs.push_back(std::move(seg));
    }
    js["segs"] = std::move(segs);
    subjects.push_back(std::move(js));
  }
  root["subjects"] = std::move(subjects);
  return root.dump();
}

Dataset dataset_from_json_text(const std::string& text, const std::string& origin) {
  ordered_json root;
  try {
    root = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(origin + ": JSON parse error: " + e.what());
  }
  try {
    Dataset d;
    d.p = root.at("p").get<int>();
    d.k_bound = json_time(root.at("K"), "K");
    const auto& subjects = root.at("subjects");
    const int n = root.at("n").get<int>();
    if (static_cast<int>(subjects.size()) != n) {
      throw std::runtime_error("subject count does not match n");
    }
    d.subjects.reserve(subjects.size());
    for (int i = 0; i < n; ++i) {
      const auto& js = subjects.at(static_cast<std::size_t>(i));
      if (js.at("id").get<int>() != i) throw std::runtime_error("subject ids must run in order");
      Subject s;
      s.at_risk_start = json_time(js.at("risk").at("start"), "risk.start");
      s.at_risk_end = json_time(js.at("risk").at("end"), "risk.end");
      if (!js.at("event").is_null()) s.event_time = json_time(js.at("event"), "event");
      const auto& segs = js.at("segs");
      if (segs.empty()) throw std::runtime_error("subject has no segments");
      bool first_seg = true;
      for (const auto& seg : segs) {
        const double t_lo = json_time(seg.at("t_lo"), "seg.t_lo");
        if (first_seg) {
          if (t_lo != s.at_risk_start) {
            throw std::runtime_error("first segment must start at the at-risk start");
          }
        } else {
          if (!(s.path.breakpoints.empty() ? t_lo > s.at_risk_start
                                           : t_lo > s.path.breakpoints.back())) {
            throw std::runtime_error("segment starts must be strictly increasing");
          }
          s.path.breakpoints.push_back(t_lo);
        }
        const auto& vals = seg.at("values");
        Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
        for (std::size_t j = 0; j < vals.size(); ++j) v[static_cast<Eigen::Index>(j)] = vals.at(j).get<double>();
        s.path.values.push_back(std::move(v));
        first_seg = false;
      }
      d.subjects.push_back(std::move(s));
    }
    return d;
  } catch (const std::runtime_error&) {
    throw;
  } catch (const std::exception& e) {
    throw std::runtime_error(origin + ": malformed dataset document: " + e.what());
  }
}

namespace {

DatasetFormat detect_save_format(const std::string& path, DatasetFormat format) {
  if (format != DatasetFormat::Auto) return format;
  const auto dot = path.rfind('.');
  if (dot != std::string::npos && path.substr(dot) == ".json") return DatasetFormat::Json;
  return DatasetFormat::Text;
}

}  // namespace

void save_dataset(const Dataset& d, const std::string& path, DatasetFormat format) {
  const DatasetFormat f = detect_save_format(path, format);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_dataset: cannot open '" + path + "' for writing");
  os << (f == DatasetFormat::Json ? dataset_to_json_text(d) : dataset_to_text(d));
  if (f == DatasetFormat::Json) os << "\n";
  if (!os) throw std::runtime_error("save_dataset: write to '" + path + "' failed");
}

Dataset load_dataset(const std::string& path, DatasetFormat format) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_dataset: cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << is.rdbuf();
  const std::string text = buffer.str();

  DatasetFormat f = format;
  if (f == DatasetFormat::Auto) {
    const auto first = text.find_first_not_of(" \t\r\n");
    f = (first != std::string::npos && text[first] == '{') ? DatasetFormat::Json
                                                           : DatasetFormat::Text;
  }
  return f == DatasetFormat::Json ? dataset_from_json_text(text, path)
                                  : dataset_from_text(text, path);
}

}  // namespace coxlasso
