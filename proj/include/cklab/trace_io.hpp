#pragma once

// Trace JSON schema and DOT export for reduction graphs.
//
//   {"relation": "arrow", "start": "(K a b)",
//    "steps": [{"rule": "K-red", "position": [], "level": 0, "term": "a"}]}

#include <string>

#include <json.hpp>

#include "cklab/reduction.hpp"

namespace cklab {

inline nlohmann::json address_to_json(const Address& a) {
  nlohmann::json arr = nlohmann::json::array();
  for (Dir d : a) arr.push_back(d == Dir::L ? "l" : "r");
  return arr;
}

inline Address address_from_json(const nlohmann::json& j) {
  Address a;
  for (const auto& e : j) {
    std::string s = e.get<std::string>();
    if (s == "l")
      a.push_back(Dir::L);
    else if (s == "r")
      a.push_back(Dir::R);
    else
      throw std::runtime_error("bad address element '" + s + "'");
  }
  return a;
}

inline nlohmann::json trace_to_json(const Trace& tr) {
  nlohmann::json j;
  j["relation"] = relation_name(tr.rel);
  j["start"] = print_term(tr.start);
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : tr.steps) {
    nlohmann::json st;
    st["rule"] = rule_name(s.info.rule);
    st["position"] = address_to_json(s.info.position);
    st["level"] = s.info.level;
    st["term"] = print_term(s.term);
    steps.push_back(std::move(st));
  }
  j["steps"] = std::move(steps);
  return j;
}

inline Trace trace_from_json(const nlohmann::json& j) {
  Trace tr;
  auto rel = relation_from_name(j.at("relation").get<std::string>());
  if (!rel) throw std::runtime_error("unknown relation in trace");
  tr.rel = *rel;
  tr.start = parse_term(j.at("start").get<std::string>(), /*allow_reserved=*/true);
  for (const auto& st : j.at("steps")) {
    TraceStep s;
    auto rule = rule_from_name(st.at("rule").get<std::string>());
    if (!rule) throw std::runtime_error("unknown rule in trace step");
    s.info.rule = *rule;
    s.info.position = address_from_json(st.at("position"));
    s.info.level = st.at("level").get<int>();
    s.term = parse_term(st.at("term").get<std::string>(), /*allow_reserved=*/true);
    tr.steps.push_back(std::move(s));
  }
  return tr;
}

inline std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

inline std::string graph_to_dot(const ReductionGraph& g, const std::string& name = "reduction") {
  std::string out = "digraph \"" + dot_escape(name) + "\" {\n";
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    out += "  n" + std::to_string(i) + " [label=\"" + dot_escape(print_term(g.nodes[i])) + "\"";
    if (i == 0) out += ", shape=box";
    if (g.expanded[i] && g.out[i].empty()) out += ", peripheries=2";  // normal form
    out += "];\n";
  }
  for (const auto& e : g.edges) {
    out += "  n" + std::to_string(e.src) + " -> n" + std::to_string(e.dst) + " [label=\"" +
           dot_escape(rule_name(e.info.rule));
    if (e.info.level > 0) out += " @" + std::to_string(e.info.level);
    out += "\"];\n";
  }
  out += "}\n";
  return out;
}

}  // namespace cklab
