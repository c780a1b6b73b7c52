import pytest

from src.environment import observe, reset
from src.exceptions import InputError, ParseError
from src.prompts import PromptFlags, ABLATION_ROWS, renderSystemMessage, \
        renderRoundPrompt, renderDemandDescription, renderClosing, \
        renderMenu, parseAction, STRATEGY_DESCRIPTION, QUESTION
from src.scenarios import presetScenario

REFERENCE_FLAGS = PromptFlags(include_strategy=True)


def _firstRound(config, stage=0):
    return observe(reset(config, 0), stage)


def test_reference_prompt_is_byte_identical(variable, reference_prompt):
    obs = _firstRound(variable)
    assert renderRoundPrompt(obs, 1, variable, None, REFERENCE_FLAGS) == \
            reference_prompt


def test_reference_round_one_same_for_constant_state(constant, variable,
        reference_prompt):
    # round 1 state does not depend on the demand model
    obs = _firstRound(constant)
    assert renderRoundPrompt(obs, 1, variable, None, REFERENCE_FLAGS) == \
            reference_prompt


def test_reference_response_parses(reference_response):
    assert parseAction(reference_response) == 0


def test_system_messages():
    assert renderSystemMessage(0, 4) == ('You play a crucial role in a '
            '4-stage supply chain as the stage 1 (retailer). Your goal is to '
            'minimize the total cost by managing inventory and orders '
            'effectively.')
    assert 'as the stage 4 (manufacturer).' in renderSystemMessage(3, 4)
    assert 'as the stage 2 (wholesaler).' in renderSystemMessage(1, 4)
    generic = renderSystemMessage(0, 2)
    assert 'a 2-stage supply chain as the stage 1 of 2.' in generic
    assert '(' not in generic
    with pytest.raises(InputError):
        renderSystemMessage(4, 4)


def test_default_flags_are_best_setting():
    flags = PromptFlags()
    assert flags.include_demand and flags.include_downstream
    assert not flags.include_strategy
    assert flags.chain_of_thought and flags.keep_history
    assert flags.restricted_menu is None
    assert ABLATION_ROWS[0] == ('default', flags)
    assert len(ABLATION_ROWS) == 8


def test_only_frame_without_optional_sections(constant):
    obs = _firstRound(constant, 1)
    flags = PromptFlags(include_demand=False, include_downstream=False)
    prompt = renderRoundPrompt(obs, 1, constant, 4, flags)
    assert 'expected demand' not in prompt
    assert 'downstream order' not in prompt
    assert 'Golden rule' not in prompt
    blocks = prompt.split('\n\n')
    assert len(blocks) == 3
    assert blocks[0].startswith('Now this is the round 1, and you are at the '
            'stage 2 of 4 in the supply chain.')
    assert blocks[1] == QUESTION
    assert blocks[2] == renderClosing(True)


def test_downstream_line(constant):
    obs = _firstRound(constant, 2)
    prompt = renderRoundPrompt(obs, 1, constant, 5, PromptFlags())
    assert 'Your downstream order from the stage 2 for this round is 5. ' \
            'What is your action' in prompt


def test_retailer_has_no_downstream_agent(constant):
    with pytest.raises(InputError):
        renderRoundPrompt(_firstRound(constant), 1, constant, 4, PromptFlags())


def test_each_flag_only_touches_its_section(constant):
    obs = _firstRound(constant, 1)
    full = PromptFlags(include_strategy=True)
    base = renderRoundPrompt(obs, 1, constant, 4, full)

    no_demand = renderRoundPrompt(obs, 1, constant, 4,
            full.with_changes(include_demand=False))
    assert no_demand == base.replace(renderDemandDescription(constant) + ' ', '')

    no_down = renderRoundPrompt(obs, 1, constant, 4,
            full.with_changes(include_downstream=False))
    assert no_down == base.replace(
            'Your downstream order from the stage 1 for this round is 4. ', '')

    no_strategy = renderRoundPrompt(obs, 1, constant, 4,
            full.with_changes(include_strategy=False))
    assert no_strategy == base.replace(STRATEGY_DESCRIPTION + '\n\n', '')

    no_cot = renderRoundPrompt(obs, 1, constant, 4,
            full.with_changes(chain_of_thought=False))
    assert no_cot == base.replace(renderClosing(True), renderClosing(False))
    assert 'reason' not in no_cot


def test_restricted_menu(constant):
    flags = PromptFlags(restricted_menu=(0, 4, 8))
    prompt = renderRoundPrompt(_firstRound(constant), 1, constant, None, flags)
    assert prompt.endswith('within brackets ([0], [4], or [8] only).')
    assert renderMenu((0, 4)) == '([0] or [4] only)'
    assert renderMenu((4,)) == '([4] only)'


def test_stage_menu_overrides_shared_menu(constant):
    flags = PromptFlags(restricted_menu=(0, 4, 8), stage_menus={1: (0, 2)})
    assert flags.menu_for(0) == (0, 4, 8)
    assert flags.menu_for(1) == (0, 2)
    prompt = renderRoundPrompt(_firstRound(constant, 1), 1, constant, 4, flags)
    assert '([0] or [2] only)' in prompt


def test_rendering_is_pure(constant):
    obs = _firstRound(constant, 3)
    flags = PromptFlags(include_strategy=True)
    assert renderRoundPrompt(obs, 1, constant, 6, flags) == \
            renderRoundPrompt(obs, 1, constant, 6, flags)


def test_demand_sentence_per_scenario():
    assert renderDemandDescription(presetScenario('larger')) == \
            'The expected demand at the retailer (stage 1) is a discrete ' \
            'uniform distribution U{0, 8} for all 12 rounds.'
    assert renderDemandDescription(presetScenario('constant')) == \
            'The expected demand at the retailer (stage 1) is a constant 4 ' \
            'units for all 12 rounds.'


########################### parsing #########################################

def test_parse_simple():
    assert parseAction('[4]') == 4
    assert parseAction('I considered [3] but choose [5]') == 5
    assert parseAction('Reason: keep [stock] level.\nAction: [7]') == 7
    assert parseAction('Action: [ 12 ]') == 12


@pytest.mark.parametrize('reply', ['no action here', '', 'Action: 4',
    'Action: [-1]', 'Action: [2.5]', '[3] then [-2]'])
def test_parse_errors(reply):
    with pytest.raises(ParseError):
        parseAction(reply)


def test_parse_menu():
    assert parseAction('[8]', (0, 4, 8)) == 8
    with pytest.raises(ParseError):
        parseAction('[5]', (0, 4, 8))


def test_parse_inverts_bracket_format():
    for k in range(0, 200):
        assert parseAction('Action: [{}]'.format(k)) == k
