#include "a2w/env.hpp"

#include <numeric>

namespace a2w {

Space Space::discrete(int n) {
  Space s;
  s.kind = Kind::Discrete;
  s.n = n;
  return s;
}

Space Space::box(std::vector<double> low, std::vector<double> high, std::vector<int> shape) {
  Space s;
  s.kind = Kind::Box;
  if (shape.empty()) shape = {static_cast<int>(low.size())};
  s.low = std::move(low);
  s.high = std::move(high);
  s.shape = std::move(shape);
  return s;
}

std::size_t Space::flat_size() const {
  if (kind == Kind::Discrete) return 1;
  return low.size();
}

std::vector<std::string> validate_space(const Space& s) {
  std::vector<std::string> v;
  if (s.kind == Space::Kind::Discrete) {
    if (s.n < 1) v.emplace_back("discrete space needs n >= 1");
    return v;
  }
  if (s.low.size() != s.high.size()) v.emplace_back("box low/high lengths differ");
  for (std::size_t i = 0; i < std::min(s.low.size(), s.high.size()); ++i) {
    if (s.low[i] > s.high[i]) v.emplace_back("box low > high at index " + std::to_string(i));
  }
  auto prod = std::accumulate(s.shape.begin(), s.shape.end(), std::size_t{1},
                              [](std::size_t a, int b) { return a * static_cast<std::size_t>(std::max(b, 0)); });
  if (prod != s.low.size()) v.emplace_back("box shape does not match bounds");
  return v;
}

void to_json(json& j, const Space& s) {
  if (s.kind == Space::Kind::Discrete) {
    j = json{{"kind", "discrete"}, {"n", s.n}};
  } else {
    j = json{{"kind", "box"}, {"low", s.low}, {"high", s.high}, {"shape", s.shape}};
  }
}

void from_json(const json& j, Space& s) {
  auto kind = j.at("kind").get<std::string>();
  if (kind == "discrete") {
    s = Space::discrete(j.at("n").get<int>());
  } else if (kind == "box") {
    s = Space::box(j.at("low").get<std::vector<double>>(), j.at("high").get<std::vector<double>>(),
                   j.value("shape", std::vector<int>{}));
  } else {
    throw ParseError("unknown space kind: " + kind, 0);
  }
}

void to_json(json& j, const EnvSpace& s) {
  j = json{{"action", s.action}, {"observation", s.observation}};
  if (s.dt) j["dt"] = *s.dt;
  if (s.frame_skip) j["frame_skip"] = *s.frame_skip;
}

void from_json(const json& j, EnvSpace& s) {
  s.action = j.at("action").get<Space>();
  s.observation = j.at("observation").get<Space>();
  s.dt = j.contains("dt") && !j["dt"].is_null() ? std::optional<double>(j["dt"].get<double>()) : std::nullopt;
  s.frame_skip = j.contains("frame_skip") && !j["frame_skip"].is_null()
                     ? std::optional<int>(j["frame_skip"].get<int>())
                     : std::nullopt;
}

}  // namespace a2w
