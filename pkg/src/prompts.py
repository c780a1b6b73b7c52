'''
Prompt protocol of the stage agents: system messages, the per-round user
prompt assembled from the state/demand/downstream/strategy sections, and
parsing of the bracketed integer action out of a reply.
'''

import re
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

from src.exceptions import InputError, ParseError

ROLE_NAMES = ('retailer', 'wholesaler', 'distributor', 'manufacturer')

STRATEGY_DESCRIPTION = (
        'Golden rule of this game: Open orders should always equal to '
        '"expected downstream orders + backlog". If open orders are larger '
        'than this, the inventory will rise (once the open orders arrive). '
        'If open orders are smaller than this, the backlog will not go down '
        'and it may even rise. Please consider the lead time and place your '
        'order in advance. Remember that your upstream has its own lead time, '
        'so do not wait until your inventory runs out. Also, avoid ordering '
        'too many units at once. Try to spread your orders over multiple '
        'rounds to prevent the bullwhip effect. Anticipate future demand '
        'changes and adjust your orders accordingly to maintain a stable '
        'inventory level.')

QUESTION = 'What is your action (order quantity) for this round?'


'''
Prompt sections to include. The defaults are the best setting of the
ablation study: demand, downstream, CoT and history on, strategy off.
'''
@dataclass(frozen=True)
class PromptFlags:
    include_demand: bool = True
    include_downstream: bool = True
    include_strategy: bool = False
    chain_of_thought: bool = True
    keep_history: bool = True
    restricted_menu: Optional[Tuple[int, ...]] = None
    # stage index -> menu, overrides restricted_menu for that stage
    stage_menus: Dict[int, Tuple[int, ...]] = field(default_factory=dict,
            hash=False, compare=False)

    def menu_for(self, stage):
        if stage in self.stage_menus:
            return self.stage_menus[stage]
        return self.restricted_menu

    def with_changes(self, **changes):
        return replace(self, **changes)

    def toDict(self):
        return {'include_demand': self.include_demand,
                'include_downstream': self.include_downstream,
                'include_strategy': self.include_strategy,
                'chain_of_thought': self.chain_of_thought,
                'keep_history': self.keep_history,
                'restricted_menu': None if self.restricted_menu is None
                    else list(self.restricted_menu),
                'stage_menus': {str(k): list(v)
                    for k, v in self.stage_menus.items()}}


# rows of the prompt ablation matrix; the first one is the reference row
_ALL_ON = PromptFlags(include_strategy=True)
ABLATION_ROWS = (
        ('default', PromptFlags()),
        ('strategy', _ALL_ON),
        ('no-demand', _ALL_ON.with_changes(include_demand=False)),
        ('no-downstream', _ALL_ON.with_changes(include_downstream=False)),
        ('no-demand-no-downstream', _ALL_ON.with_changes(
            include_demand=False, include_downstream=False)),
        ('no-history', PromptFlags(keep_history=False)),
        ('no-cot', _ALL_ON.with_changes(chain_of_thought=False)),
        ('strategy-no-history', _ALL_ON.with_changes(keep_history=False)),
        )


def renderSystemMessage(stage, num_stages):
    if not 0 <= stage < num_stages:
        raise InputError('stage {} outside 0..{}'.format(stage, num_stages - 1))
    if num_stages == len(ROLE_NAMES):
        position = 'the stage {} ({})'.format(stage + 1, ROLE_NAMES[stage])
    else:
        position = 'the stage {} of {}'.format(stage + 1, num_stages)
    return ('You play a crucial role in a {}-stage supply chain as {}. '
            'Your goal is to minimize the total cost by managing inventory '
            'and orders effectively.').format(num_stages, position)


def _intList(values):
    return '[{}]'.format(', '.join(str(int(x)) for x in values))


def renderStateDescription(obs):
    return '\n'.join([
        ' - Lead Time: {} round(s)'.format(obs.params.lead_time),
        ' - Inventory Level: {} unit(s)'.format(obs.inventory),
        ' - Current Backlog (you owing to the downstream): {} unit(s)'.format(
            obs.backlog),
        ' - Upstream Backlog (your upstream owing to you): {} unit(s)'.format(
            obs.upstream_backlog),
        ' - Previous Sales (in the recent round(s), from old to new): '
            '{}'.format(_intList(obs.recent_sales)),
        ' - Arriving Deliveries (in this and the next round(s), from near to '
            'far): {}'.format(_intList(obs.arriving_deliveries)),
        ])


def renderDemandDescription(scenario):
    return 'The expected demand at the retailer (stage 1) is {}.'.format(
            scenario.demand.describe(scenario.num_periods))


def renderDownstreamDescription(stage, downstream_order):
    return 'Your downstream order from the stage {} for this round is {}.'.format(
            stage, int(downstream_order))


'''
"([0], [4], or [8] only)" style bracket clause for a restricted menu
'''
def renderMenu(menu):
    items = ['[{}]'.format(int(x)) for x in menu]
    if len(items) == 1:
        joined = items[0]
    elif len(items) == 2:
        joined = '{} or {}'.format(*items)
    else:
        joined = '{}, or {}'.format(', '.join(items[:-1]), items[-1])
    return '({} only)'.format(joined)


def renderClosing(chain_of_thought, menu=None):
    brackets = '(e.g. [0])' if menu is None else renderMenu(menu)
    if chain_of_thought:
        return ('Please state your reason in 1-2 sentences first and then '
                'provide your action as a non-negative integer within brackets '
                '{}.').format(brackets)
    return ('Please provide your action as a non-negative integer within '
            'brackets {}.').format(brackets)


def renderReformatRequest(menu=None):
    brackets = '(e.g. [0])' if menu is None else renderMenu(menu)
    return ('Your previous reply did not contain a valid action. Please reply '
            'with your action as a non-negative integer within brackets '
            '{}.').format(brackets)


'''
User prompt for one stage in one round. Stage numbers in the text are
1-based. The retailer never gets a downstream order line; it has the demand
sentence instead.
'''
def renderRoundPrompt(obs, period, scenario, downstream_order=None,
        flags=None):
    flags = PromptFlags() if flags is None else flags
    stage = obs.stage_index
    if stage == 0 and downstream_order is not None:
        raise InputError('the retailer (stage 1) has no downstream agent')

    header = ('Now this is the round {}, and you are at the stage {} of {} in '
            'the supply chain. Given your current state:').format(
                    period, stage + 1, scenario.num_stages)
    question = ''
    if flags.include_demand:
        question += renderDemandDescription(scenario) + ' '
    if flags.include_downstream and stage >= 1 and downstream_order is not None:
        question += renderDownstreamDescription(stage, downstream_order) + ' '
    question += QUESTION

    blocks = ['{}\n{}'.format(header, renderStateDescription(obs)), question]
    if flags.include_strategy:
        blocks.append(STRATEGY_DESCRIPTION)
    blocks.append(renderClosing(flags.chain_of_thought, flags.menu_for(stage)))
    return '\n\n'.join(blocks)


_BRACKETS = re.compile(r'\[([^\[\]]*)\]')
_NUMERIC = re.compile(r'^\s*[-+]?\d+(\.\d*)?\s*$')
_NON_NEGATIVE_INT = re.compile(r'^\s*\+?\d+\s*$')

'''
Last bracketed number in the reply is the action; earlier bracketed numbers
are treated as part of the reasoning. Brackets holding text are skipped.
'''
def parseAction(response, restricted_menu=None):
    if response is None:
        raise ParseError('empty response')
    candidates = [c for c in _BRACKETS.findall(response) if _NUMERIC.match(c)]
    if not candidates:
        raise ParseError('no bracketed integer in response: {!r}'.format(
            response[-200:]))
    last = candidates[-1]
    if not _NON_NEGATIVE_INT.match(last):
        raise ParseError('bracketed action is not a non-negative integer: '
                '[{}]'.format(last))
    value = int(last.strip())
    if restricted_menu is not None and value not in restricted_menu:
        raise ParseError('action {} not in the allowed menu {}'.format(
            value, list(restricted_menu)))
    return value
