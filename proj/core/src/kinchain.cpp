#include "demoproc/kinchain.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace demoproc::kinchain {

namespace pt = boost::property_tree;

KinematicChain::KinematicChain(std::string base, std::string tip, std::vector<Joint> joints)
    : base_(std::move(base)), tip_(std::move(tip)), joints_(std::move(joints)) {
  std::set<std::string> names;
  for (auto& j : joints_) {
    if (!names.insert(j.name).second) {
      throw FormatError(fmt::format("duplicate joint name '{}'", j.name));
    }
    if (j.actuated()) {
      const double n = j.axis.norm();
      if (!(n > 0.0) || !std::isfinite(n)) {
        throw FormatError(fmt::format("joint '{}' has a zero or non-finite axis", j.name));
      }
      j.axis /= n;
      ++actuated_;
    }
  }
}

std::vector<std::string> KinematicChain::actuated_names() const {
  std::vector<std::string> out;
  for (const auto& j : joints_) {
    if (j.actuated()) out.push_back(j.name);
  }
  return out;
}

namespace {

struct RawJoint {
  Joint joint;
  std::string type;
};

std::optional<std::string> attribute(const pt::ptree& node, const char* name) {
  if (auto v = node.get_optional<std::string>(std::string("<xmlattr>.") + name)) return *v;
  return std::nullopt;
}

geom::Vec3 parse_triple(const std::string& text, std::string_view what, std::string_view joint) {
  std::istringstream in(text);
  std::vector<double> v;
  std::string tok;
  while (in >> tok) {
    double d = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), d);
    if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(d)) {
      throw FormatError(fmt::format("joint '{}': invalid number '{}' in {}", joint, tok, what));
    }
    v.push_back(d);
  }
  if (v.size() != 3) {
    throw FormatError(fmt::format("joint '{}': {} needs 3 values, found {}", joint, what, v.size()));
  }
  return {v[0], v[1], v[2]};
}

bool is_markup(const std::string& key) { return key == "<xmlattr>" || key == "<xmltext>" || key == "<xmlcomment>"; }

RawJoint parse_joint(const pt::ptree& node, Warnings& warnings) {
  RawJoint raw;
  auto name = attribute(node, "name");
  if (!name) throw FormatError("joint element without a name attribute");
  raw.joint.name = *name;
  auto type = attribute(node, "type");
  if (!type) throw FormatError(fmt::format("joint '{}' has no type attribute", *name));
  raw.type = *type;
  if (raw.type == "revolute" || raw.type == "continuous") {
    raw.joint.type = JointType::Revolute;
  } else if (raw.type == "prismatic") {
    raw.joint.type = JointType::Prismatic;
  } else {
    raw.joint.type = JointType::Fixed;
  }

  bool has_parent = false;
  bool has_child = false;
  for (const auto& [key, child] : node) {
    if (is_markup(key)) continue;
    if (key == "origin") {
      geom::Vec3 xyz = geom::Vec3::Zero();
      geom::Vec3 rpy = geom::Vec3::Zero();
      if (auto v = attribute(child, "xyz")) xyz = parse_triple(*v, "origin xyz", *name);
      if (auto v = attribute(child, "rpy")) rpy = parse_triple(*v, "origin rpy", *name);
      raw.joint.origin = {geom::Rotation::from_rpy(rpy.x(), rpy.y(), rpy.z()), xyz};
    } else if (key == "axis") {
      if (auto v = attribute(child, "xyz")) raw.joint.axis = parse_triple(*v, "axis xyz", *name);
    } else if (key == "parent") {
      auto link = attribute(child, "link");
      if (!link) throw FormatError(fmt::format("joint '{}': <parent> without link", *name));
      raw.joint.parent = *link;
      has_parent = true;
    } else if (key == "child") {
      auto link = attribute(child, "link");
      if (!link) throw FormatError(fmt::format("joint '{}': <child> without link", *name));
      raw.joint.child = *link;
      has_child = true;
    } else {
      warnings.push_back(fmt::format("ignored element <{}> in joint '{}'", key, *name));
    }
  }
  if (!has_parent || !has_child) {
    throw FormatError(fmt::format("joint '{}' needs both <parent> and <child>", *name));
  }
  return raw;
}

}  // namespace

ParsedChain parse_chain(std::string_view xml, std::string_view base_link,
                        std::string_view tip_link) {
  pt::ptree doc;
  try {
    std::istringstream in{std::string(xml)};
    pt::read_xml(in, doc, pt::xml_parser::no_comments | pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw FormatError(fmt::format("malformed XML at line {}: {}", e.line(), e.message()));
  }
  const auto robot = doc.get_child_optional("robot");
  if (!robot) throw FormatError("XML document has no <robot> root element");

  ParsedChain out;
  std::vector<RawJoint> joints;
  std::set<std::string> links;
  for (const auto& [key, node] : *robot) {
    if (is_markup(key)) continue;
    if (key == "link") {
      auto name = attribute(node, "name");
      if (!name) throw FormatError("link element without a name attribute");
      links.insert(*name);
      for (const auto& [sub, ignored] : node) {
        if (is_markup(sub)) continue;
        out.warnings.push_back(fmt::format("ignored element <{}> in link '{}'", sub, *name));
      }
    } else if (key == "joint") {
      joints.push_back(parse_joint(node, out.warnings));
    } else {
      out.warnings.push_back(fmt::format("ignored element <{}>", key));
    }
  }

  std::set<std::string> names;
  std::map<std::string, std::vector<std::size_t>> parents_of;
  for (std::size_t i = 0; i < joints.size(); ++i) {
    if (!names.insert(joints[i].joint.name).second) {
      throw FormatError(fmt::format("duplicate joint name '{}'", joints[i].joint.name));
    }
    parents_of[joints[i].joint.child].push_back(i);
  }

  std::vector<Joint> path;
  std::set<std::string> visited;
  std::string link(tip_link);
  while (link != base_link) {
    if (!visited.insert(link).second) {
      throw TopologyError(fmt::format("kinematic loop through link '{}'", link));
    }
    const auto it = parents_of.find(link);
    if (it == parents_of.end()) {
      throw TopologyError(fmt::format("no joint path from '{}' to '{}' (link '{}' has no parent)",
                                      base_link, tip_link, link));
    }
    if (it->second.size() > 1) {
      throw UnsupportedTopologyError(
          fmt::format("link '{}' on the path has {} parent joints; only serial chains are supported",
                      link, it->second.size()));
    }
    const RawJoint& raw = joints[it->second.front()];
    if (raw.type != "revolute" && raw.type != "continuous" && raw.type != "prismatic" &&
        raw.type != "fixed") {
      throw UnsupportedJointError(
          fmt::format("joint '{}' has unsupported type '{}'", raw.joint.name, raw.type));
    }
    path.push_back(raw.joint);
    link = raw.joint.parent;
  }
  std::reverse(path.begin(), path.end());
  if (!links.empty() && (!links.contains(std::string(base_link)) ||
                         !links.contains(std::string(tip_link)))) {
    out.warnings.push_back("base or tip link is referenced by joints but not declared as <link>");
  }
  out.chain = KinematicChain(std::string(base_link), std::string(tip_link), std::move(path));
  return out;
}

geom::Pose forward_kinematics(const KinematicChain& chain, std::span<const double> q) {
  if (q.size() != chain.actuated_count()) {
    throw ConfigurationError(fmt::format("joint configuration has {} values, chain has {} actuated joints",
                                         q.size(), chain.actuated_count()));
  }
  geom::Pose t;
  std::size_t k = 0;
  for (const auto& j : chain.joints()) {
    t = geom::compose(t, j.origin);
    switch (j.type) {
      case JointType::Revolute:
        t = geom::compose(t, {geom::Rotation::from_axis_angle(j.axis, q[k++]), geom::Vec3::Zero()});
        break;
      case JointType::Prismatic:
        t = geom::compose(t, geom::Pose::from_translation(j.axis * q[k++]));
        break;
      case JointType::Fixed:
        break;
    }
  }
  return t;
}

std::vector<demolog::PoseSample> camera_reference_trajectory(
    const KinematicChain& chain, std::span<const demolog::Stamped<demolog::JointState>> joints,
    const geom::Pose& hand_eye) {
  std::vector<demolog::PoseSample> out;
  out.reserve(joints.size());
  for (const auto& s : joints) {
    out.push_back({s.timestamp_ns,
                   geom::compose(forward_kinematics(chain, s.value.positions), hand_eye)});
  }
  return out;
}

std::vector<demolog::Stamped<demolog::JointState>> parse_joint_csv(std::string_view text) {
  std::vector<demolog::Stamped<demolog::JointState>> out;
  std::size_t line_no = 0;
  std::optional<std::size_t> width;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string line(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    for (char& c : line) {
      if (c == ',' || c == '\r' || c == '\t') c = ' ';
    }
    std::istringstream in(line);
    std::vector<double> values;
    std::string tok;
    while (in >> tok) {
      if (values.empty() && tok.front() == '#') break;
      double d = 0.0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), d);
      if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(d)) {
        throw FormatError(fmt::format("joint CSV line {}: invalid number '{}'", line_no, tok));
      }
      values.push_back(d);
    }
    if (values.empty()) continue;
    if (values.size() < 2) {
      throw FormatError(fmt::format("joint CSV line {}: need a timestamp and joint values", line_no));
    }
    if (width && *width != values.size()) {
      throw FormatError(fmt::format("joint CSV line {}: expected {} fields, found {}", line_no,
                                    *width, values.size()));
    }
    width = values.size();
    if (values[0] < 0.0) throw FormatError(fmt::format("joint CSV line {}: negative timestamp", line_no));
    demolog::Stamped<demolog::JointState> s;
    s.timestamp_ns = static_cast<std::uint64_t>(std::llround(values[0] * 1e9));
    s.value.positions.assign(values.begin() + 1, values.end());
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace demoproc::kinchain
