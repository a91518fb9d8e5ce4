#pragma once

#include "tsdial/corpus.hpp"

#include <cstdint>

// Templated request/inform dialogues over a randomly populated database, used
// as a desk-scale stand-in for MultiWOZ.
namespace tsdial {

struct SyntheticDomainSpec {
    std::string name;
    std::vector<SlotValues> informable;
    std::vector<std::string> requestable;
    int entities = 12;
};

struct SynthesisSpec {
    std::vector<SyntheticDomainSpec> domains;
    /// Episodes whose first segment is in each domain.
    int episodes_per_domain = 100;
    /// Share of episodes that continue into a second domain.
    double multi_domain_fraction = 0.3;
    double greeting_fraction = 0.5;
    /// Share of two-constraint segments that first hit an empty database result.
    double no_result_fraction = 0.25;

    /// Throws CorpusError when a domain lacks slots, or a slot has < 2 values.
    void validate() const;

    nlohmann::ordered_json to_json() const;
    static SynthesisSpec from_json(const nlohmann::ordered_json& j);
    /// Restaurant + hotel, matching the shapes used in the tests.
    static SynthesisSpec standard();
};

struct SyntheticCorpus {
    Ontology ontology;
    Database database;
    std::vector<Episode> episodes;  // lexicalized, with domain labels
};

SyntheticCorpus generate_synthetic_corpus(const SynthesisSpec& spec, std::uint64_t seed);

}  // namespace tsdial
