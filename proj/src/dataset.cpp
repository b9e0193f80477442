#include "hitl/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace hitl {

namespace {

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

// Line reader over a whole file. Blank lines and lines starting with '#'
// are skipped; positions are reported 1-based by line, 0-based by byte.
class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  /// Next significant line split into tokens, or null at end of input.
  const std::vector<std::string_view>* try_next() {
    while (pos_ < text_.size()) {
      line_start_ = pos_;
      ++line_;
      const std::size_t eol = text_.find('\n', pos_);
      const std::size_t end = eol == std::string_view::npos ? text_.size() : eol;
      std::string_view line = text_.substr(pos_, end - pos_);
      pos_ = eol == std::string_view::npos ? text_.size() : eol + 1;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      tokens_.clear();
      std::size_t i = 0;
      while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        if (j > i) tokens_.push_back(line.substr(i, j - i));
        i = j;
      }
      if (tokens_.empty() || tokens_[0].front() == '#') continue;
      return &tokens_;
    }
    return nullptr;
  }

  const std::vector<std::string_view>& next(std::string_view expecting) {
    if (const auto* t = try_next()) return *t;
    throw ParseError("unexpected end of input, expected " + std::string(expecting), line_ + 1, text_.size());
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line_, line_start_); }

  void expect_count(std::size_t n, std::string_view record) const {
    if (tokens_.size() != n) {
      fail("'" + std::string(record) + "' record needs " + std::to_string(n - 1) + " fields, got " +
           std::to_string(tokens_.size() - 1));
    }
  }

  double number(std::size_t field) const {
    const std::string_view t = tokens_.at(field);
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
      fail("field " + std::to_string(field) + " is not a number: '" + std::string(t) + "'");
    }
    return v;
  }

  std::uint64_t integer(std::size_t field) const {
    const std::string_view t = tokens_.at(field);
    std::uint64_t v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
      fail("field " + std::to_string(field) + " is not a non-negative integer: '" + std::string(t) + "'");
    }
    return v;
  }

  std::size_t index(std::size_t field) const { return static_cast<std::size_t>(integer(field)); }

  void header(std::string_view magic) {
    const auto& t = next("header");
    if (t[0] != magic) fail("expected '" + std::string(magic) + "' header");
    if (t.size() != 2 || t[1].size() < 2 || t[1][0] != 'v') fail("malformed version tag");
    int version = 0;
    const auto res = std::from_chars(t[1].data() + 1, t[1].data() + t[1].size(), version);
    if (res.ec != std::errc() || res.ptr != t[1].data() + t[1].size()) fail("malformed version tag");
    if (version != kFormatVersion) {
      throw Error(ErrorKind::VersionMismatch, std::string(magic) + " version " + std::to_string(version) +
                                                  " is not supported (expected " +
                                                  std::to_string(kFormatVersion) + ")");
    }
  }

  void trailer() {
    if (try_next() != nullptr) fail("content after 'end'");
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
  std::size_t line_start_ = 0;
  std::vector<std::string_view> tokens_;
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path);
  out << content;
  if (!out) throw Error(ErrorKind::InvalidArgument, "failed writing " + path);
}

CorrectionMode mode_field(const Reader& r, std::string_view text, const std::string& record) {
  const auto mode = parse_mode(text);
  if (!mode) r.fail(record + ": unknown mode '" + std::string(text) + "'");
  return *mode;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_graph(std::ostream& out, const FactorGraph& g) {
  out << kGraphMagic << " v" << kFormatVersion << '\n';
  out << "meta " << fmt(g.meta.max_range) << ' ' << g.meta.seed << '\n';
  out << "poses " << g.poses.size() << '\n';
  for (const auto& p : g.poses) out << fmt(p.x) << ' ' << fmt(p.y) << ' ' << fmt(p.theta) << '\n';
  out << "odometry " << g.odometry.size() << '\n';
  for (const auto& f : g.odometry) {
    out << f.i << ' ' << f.j << ' ' << fmt(f.z.translation.x()) << ' ' << fmt(f.z.translation.y()) << ' '
        << fmt(f.z.rotation);
    for (int r = 0; r < 3; ++r) {
      for (int c = r; c < 3; ++c) out << ' ' << fmt(f.info(r, c));
    }
    out << '\n';
  }
  for (const auto& s : g.scans) {
    out << "scan " << s.pose_id << ' ' << s.points.size() << '\n';
    for (const auto& p : s.points) out << fmt(p.x()) << ' ' << fmt(p.y()) << '\n';
  }
  for (const auto& h : g.human_factors) {
    out << "human " << to_string(h.mode);
    for (const Vec2* v : {&h.pa.p0, &h.pa.p1, &h.pb.p0, &h.pb.p1}) out << ' ' << fmt(v->x()) << ' ' << fmt(v->y());
    out << ' ' << h.sa.size() << ' ' << h.sb.size() << '\n';
    for (const auto* sel : {&h.sa, &h.sb}) {
      for (const auto& r : *sel) out << r.pose_id << ' ' << r.point_index << '\n';
    }
  }
  out << "end\n";
}

FactorGraph read_graph(std::string_view text) {
  Reader r(text);
  r.header(kGraphMagic);
  FactorGraph g;

  auto t = r.next("meta");
  if (t[0] != "meta") r.fail("expected 'meta' record");
  r.expect_count(3, "meta");
  g.meta.max_range = r.number(1);
  g.meta.seed = r.integer(2);

  t = r.next("poses");
  if (t[0] != "poses") r.fail("expected 'poses' record");
  r.expect_count(2, "poses");
  const std::size_t n = r.index(1);
  g.poses.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    r.next("pose line");
    r.expect_count(3, "pose");
    g.poses.emplace_back(r.number(0), r.number(1), r.number(2));
  }

  t = r.next("odometry");
  if (t[0] != "odometry") r.fail("expected 'odometry' record");
  r.expect_count(2, "odometry");
  const std::size_t m = r.index(1);
  for (std::size_t k = 0; k < m; ++k) {
    r.next("odometry line");
    r.expect_count(11, "odometry line");
    RelativePoseFactor f;
    f.i = r.index(0);
    f.j = r.index(1);
    f.z.translation = {r.number(2), r.number(3)};
    f.z.rotation = r.number(4);
    std::size_t field = 5;
    for (int row = 0; row < 3; ++row) {
      for (int c = row; c < 3; ++c) {
        f.info(row, c) = r.number(field++);
        f.info(c, row) = f.info(row, c);
      }
    }
    g.odometry.push_back(f);
  }

  while (true) {
    t = r.next("'scan', 'human' or 'end'");
    if (t[0] == "end") {
      r.expect_count(1, "end");
      break;
    }
    if (t[0] == "scan") {
      r.expect_count(3, "scan");
      Scan s;
      s.pose_id = r.index(1);
      const std::size_t count = r.index(2);
      s.points.reserve(count);
      for (std::size_t k = 0; k < count; ++k) {
        r.next("scan point");
        r.expect_count(2, "scan point");
        s.points.emplace_back(r.number(0), r.number(1));
      }
      g.scans.push_back(std::move(s));
    } else if (t[0] == "human") {
      const std::string record = "human factor " + std::to_string(g.human_factors.size());
      r.expect_count(12, "human");
      HumanCorrectionFactor h;
      h.mode = mode_field(r, t[1], record);
      h.pa = {{r.number(2), r.number(3)}, {r.number(4), r.number(5)}};
      h.pb = {{r.number(6), r.number(7)}, {r.number(8), r.number(9)}};
      const std::size_t na = r.index(10);
      const std::size_t nb = r.index(11);
      for (std::size_t k = 0; k < na + nb; ++k) {
        r.next("selection line");
        r.expect_count(2, "selection line");
        (k < na ? h.sa : h.sb).push_back({r.index(0), r.index(1)});
      }
      g.human_factors.push_back(std::move(h));
    } else {
      r.fail("unknown record '" + std::string(t[0]) + "'");
    }
  }
  r.trailer();
  return g;
}

void save_graph(const FactorGraph& graph, const std::string& path) {
  std::ostringstream ss;
  write_graph(ss, graph);
  write_file(path, ss.str());
}

FactorGraph load_graph(const std::string& path) { return read_graph(read_file(path)); }

void write_script(std::ostream& out, const std::vector<RawCorrection>& script) {
  out << kScriptMagic << " v" << kFormatVersion << '\n';
  for (const auto& c : script) {
    out << "correction " << to_string(c.mode);
    for (const Vec2* v : {&c.pa0.p0, &c.pa0.p1, &c.pb0.p0, &c.pb0.p1}) out << ' ' << fmt(v->x()) << ' ' << fmt(v->y());
    out << '\n';
  }
  out << "end\n";
}

std::vector<RawCorrection> read_script(std::string_view text) {
  Reader r(text);
  r.header(kScriptMagic);
  std::vector<RawCorrection> out;
  while (true) {
    const auto& t = r.next("'correction' or 'end'");
    if (t[0] == "end") {
      r.expect_count(1, "end");
      break;
    }
    const std::string record = "correction record " + std::to_string(out.size());
    if (t[0] != "correction") r.fail(record + ": unknown record '" + std::string(t[0]) + "'");
    r.expect_count(10, "correction");
    RawCorrection c;
    c.mode = mode_field(r, t[1], record);
    c.pa0 = {{r.number(2), r.number(3)}, {r.number(4), r.number(5)}};
    c.pb0 = {{r.number(6), r.number(7)}, {r.number(8), r.number(9)}};
    out.push_back(c);
  }
  r.trailer();
  return out;
}

void save_script(const std::vector<RawCorrection>& script, const std::string& path) {
  std::ostringstream ss;
  write_script(ss, script);
  write_file(path, ss.str());
}

std::vector<RawCorrection> load_script(const std::string& path) { return read_script(read_file(path)); }

void write_truth(std::ostream& out, const GroundTruth& truth) {
  out << kTruthMagic << " v" << kFormatVersion << '\n';
  for (const auto& [name, refs] : truth.features) {
    out << "feature " << name << ' ' << refs.size() << '\n';
    for (const auto& r : refs) out << r.pose_id << ' ' << r.point_index << '\n';
  }
  for (const auto& m : truth.measurements) {
    out << "measure " << (m.kind == MeasurementKind::Angle ? "angle" : "distance") << ' ' << m.name << ' '
        << m.feature_a << ' ' << m.feature_b << ' ' << fmt(m.truth) << '\n';
  }
  out << "end\n";
}

GroundTruth read_truth(std::string_view text) {
  Reader r(text);
  r.header(kTruthMagic);
  GroundTruth truth;
  while (true) {
    const auto& t = r.next("'feature', 'measure' or 'end'");
    if (t[0] == "end") {
      r.expect_count(1, "end");
      break;
    }
    if (t[0] == "feature") {
      r.expect_count(3, "feature");
      const std::string name(t[1]);
      const std::size_t n = r.index(2);
      FeatureSelector refs;
      for (std::size_t k = 0; k < n; ++k) {
        r.next("feature point");
        r.expect_count(2, "feature point");
        refs.push_back({r.index(0), r.index(1)});
      }
      truth.features[name] = std::move(refs);
    } else if (t[0] == "measure") {
      r.expect_count(6, "measure");
      GroundTruthMeasurement m;
      if (t[1] == "angle") {
        m.kind = MeasurementKind::Angle;
      } else if (t[1] == "distance") {
        m.kind = MeasurementKind::Distance;
      } else {
        r.fail("unknown measurement kind '" + std::string(t[1]) + "'");
      }
      m.name = t[2];
      m.feature_a = t[3];
      m.feature_b = t[4];
      m.truth = r.number(5);
      truth.measurements.push_back(std::move(m));
    } else {
      r.fail("unknown record '" + std::string(t[0]) + "'");
    }
  }
  r.trailer();
  return truth;
}

void save_truth(const GroundTruth& truth, const std::string& path) {
  std::ostringstream ss;
  write_truth(ss, truth);
  write_file(path, ss.str());
}

GroundTruth load_truth(const std::string& path) { return read_truth(read_file(path)); }

}  // namespace hitl
