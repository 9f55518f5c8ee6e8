#pragma once

#include <optional>
#include <string>

namespace stepforge::env {

// A problem to prove: unique id, goal text in the active environment's
// syntax, optional stored disproof target, dataset provenance tag.
struct Statement {
    std::string id;
    std::string goal_text;
    std::optional<std::string> negation_text;
    std::string source_tag;

    Statement() = default;
    Statement(std::string id, std::string goal_text, std::optional<std::string> negation_text = std::nullopt,
              std::string source_tag = "")
        : id(std::move(id)),
          goal_text(std::move(goal_text)),
          negation_text(std::move(negation_text)),
          source_tag(std::move(source_tag)) {}
};

}  // namespace stepforge::env
