#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "qms/classify.hpp"
#include "qms/diagonalize.hpp"
#include "qms/markov.hpp"

namespace qms {

using Json = nlohmann::ordered_json;

// Thrown on malformed documents; carries the field path of the offence.
struct DocumentError : std::runtime_error {
    std::string path;
    DocumentError(std::string p, const std::string& what)
        : std::runtime_error("at " + p + ": " + what), path(std::move(p)) {}
};

// Interaction documents: a single human-writable JSON format. Complex entries
// are [re, im] pairs; exact eigenvalue payloads are "p/q" strings. Unknown
// fields are rejected.
Json spec_to_json(const InteractionSpec& spec);
InteractionSpec spec_from_json(const Json& doc);

InteractionSpec load_spec(const std::string& path);
void save_json(const std::string& path, const Json& doc);
Json load_json(const std::string& path);

// FNV-1a of the canonical serialization.
std::string digest(const Json& doc);

Json validation_to_json(const ValidationReport& rep);
Json classification_to_json(const FactorClassification& fc);
Json diagonalization_to_json(const DiagonalizationRun& run,
                             const InteractionSpec& spec);
Json chain_to_json(const ClassicalMarkovChain& chain, const InteractionSpec& spec,
                   const Segment& seg);

}  // namespace qms
