#include "ldacp/campaign.hpp"

#include <stdexcept>

namespace ldacp {

std::string_view name(Industry i) {
  switch (i) {
    case Industry::kGames: return "Games";
    case Industry::kMedia: return "Media";
    case Industry::kECommerce: return "E-commerce";
    case Industry::kLifeServices: return "Life Services";
  }
  throw std::invalid_argument("invalid industry");
}

std::string_view name(CampaignType t) {
  switch (t) {
    case CampaignType::kApp: return "APP";
    case CampaignType::kAppAdvance: return "APP_ADVANCE";
    case CampaignType::kSitePage: return "SITE_PAGE";
    case CampaignType::kLiveStream: return "LIVE_STREAM";
  }
  throw std::invalid_argument("invalid campaign type");
}

Industry industry_from_string(std::string_view s) {
  for (Industry i : kAllIndustries)
    if (name(i) == s) return i;
  throw std::invalid_argument("unknown industry '" + std::string(s) + "'");
}

CampaignType campaign_type_from_string(std::string_view s) {
  for (CampaignType t : kAllCampaignTypes)
    if (name(t) == s) return t;
  throw std::invalid_argument("unknown campaign type '" + std::string(s) + "'");
}

}  // namespace ldacp
