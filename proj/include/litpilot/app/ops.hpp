#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "litpilot/app/runtime.hpp"
#include "litpilot/retrieval/index.hpp"

// Request-level operations shared by the service and the CLI, so both
// serialize exactly the same library results. k = 0 means the configured
// default.
namespace litpilot::app {

std::vector<retrieval::SearchHit> search_hits(const Runtime& rt, std::string_view query, std::size_t k,
                                              const retrieval::SearchFilter& filter = {});
nlohmann::ordered_json search(const Runtime& rt, std::string_view query, std::size_t k,
                              const retrieval::SearchFilter& filter = {});

// {doc_id, title, authors, year, venue, domains} per paper, by doc_id.
nlohmann::ordered_json paper_list(const Runtime& rt);
nlohmann::ordered_json paper(const Runtime& rt, const std::string& doc_id);  // throws UnknownDocId

nlohmann::ordered_json compare(const Runtime& rt, const std::vector<std::string>& doc_ids);
nlohmann::ordered_json review(const Runtime& rt, const std::vector<std::string>& doc_ids);
nlohmann::ordered_json survey(const Runtime& rt, const std::string& name);
nlohmann::ordered_json topic(const Runtime& rt, std::string_view query, std::size_t k);
nlohmann::ordered_json translate(const Runtime& rt, std::string_view source, std::string_view direction,
                                 const std::optional<std::string>& domain = std::nullopt);
nlohmann::ordered_json polish(const Runtime& rt, std::string_view draft, std::string_view style);

}  // namespace litpilot::app
