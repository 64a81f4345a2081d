#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cocreate/ideation.hpp"
#include "cocreate/session.hpp"
#include "cocreate/sketch.hpp"

namespace cocreate::refinement {

struct SketchBounds {
  std::size_t min_parameters = 1;
  std::size_t max_parameters = 8;
  std::size_t min_options = 2;
  std::size_t max_options = 6;
};

std::vector<std::string> check_bounds(const sketch::Sketch& s, const SketchBounds& bounds = {});

TextRequest sketch_instruction(const std::string& base_prompt, const std::string& refine_prompt,
                               const SketchBounds& bounds = {});

struct Synthesis {
  sketch::Sketch sketch;
  bool used_image_input = false;
};

// Asks the text provider for a sketch, with one repair round. The base
// image pixels go along only when the provider accepts image input.
Synthesis synthesize_sketch(TextProvider& text, const ImageRecord& base,
                            const std::optional<Bytes>& base_png, const std::string& refine_prompt,
                            const SketchBounds& bounds = {});

// Records RefinePrompted, synthesizes a sketch for the tab's base image and
// records SketchSynthesized. Used both for the first prompt and for
// re-prompting; earlier sketches stay resolvable by id.
sketch::Sketch refine(SessionHandle& session, Backends& backends, const std::string& tab_id,
                      const std::string& refine_prompt);
sketch::Sketch reprompt(SessionHandle& session, Backends& backends, const std::string& tab_id,
                        const std::string& new_refine_prompt);

// Pure: renders the tab's current sketch, or returns the manual edit
// verbatim with no spans.
sketch::RenderedPrompt preview(const Session& state, const std::string& tab_id,
                               const sketch::Selections& selections,
                               const std::optional<std::string>& manual_edit = std::nullopt);

struct VariationOutcome {
  RefinementRound round;
  ImageRecord image;
};

// Records (PromptManuallyEdited,) SelectionsApplied, edits the base image
// with the final prompt, then records VariationGenerated. A provider
// failure leaves the round in the log, marked failed.
VariationOutcome generate_variation(SessionHandle& session, Backends& backends,
                                    const std::string& tab_id, const sketch::Selections& selections,
                                    const std::optional<std::string>& manual_edit = std::nullopt);

}  // namespace cocreate::refinement
