#include "merge_arena/types.hpp"

namespace merge_arena {

std::string_view to_string(Lane lane) {
  return lane == Lane::merge ? "merge" : "traffic";
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::ego:
      return "ego";
    case Role::front_merge:
      return "front_merge";
    case Role::traffic:
      return "traffic";
  }
  return "?";
}

std::string_view to_string(Variant variant) {
  return variant == Variant::three_vehicle ? "three_vehicle" : "full_scene";
}

std::string_view to_string(Status status) {
  switch (status) {
    case Status::running:
      return "running";
    case Status::success:
      return "success";
    case Status::collision:
      return "collision";
    case Status::timeout:
      return "timeout";
  }
  return "?";
}

std::string_view to_string(Fault fault) {
  switch (fault) {
    case Fault::none:
      return "none";
    case Fault::at_fault:
      return "at_fault";
    case Fault::no_fault:
      return "no_fault";
  }
  return "?";
}

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::merge_network:
      return "merge_network";
    case PolicyKind::constant:
      return "constant";
    case PolicyKind::random:
      return "random";
    case PolicyKind::reactive:
      return "reactive";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  if (text == "three_vehicle" || text == "three-vehicle" || text == "3v") {
    return Variant::three_vehicle;
  }
  if (text == "full_scene" || text == "full-scene" || text == "fs") {
    return Variant::full_scene;
  }
  throw ConfigError("unknown variant '" + std::string(text) +
                    "' (expected three-vehicle or full-scene)");
}

PolicyKind parse_traffic_policy(std::string_view text) {
  if (text == "constant") return PolicyKind::constant;
  if (text == "random") return PolicyKind::random;
  if (text == "reactive") return PolicyKind::reactive;
  throw ConfigError("unknown traffic policy '" + std::string(text) +
                    "' (expected constant, random or reactive)");
}

}  // namespace merge_arena
